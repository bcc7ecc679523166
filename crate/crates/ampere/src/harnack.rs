//! Harnack ratios for `L_u v = 0` on sections of a convex function, solved in John-normalized
//! coordinates.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::{self, ConvexDomain, Point};
use crate::grid::{GridFunction, NodeKind};
use crate::john::{self, AffineMap};
use crate::linma::{self, MMatrixReport};
use crate::tol::Tolerances;

pub struct HarnackInput<'a> {
    pub u: &'a dyn Fn(Point) -> f64,
    /// Dirichlet data on the section boundary.
    pub trace: &'a dyn Fn(Point) -> f64,
    pub center: Point,
    /// The solve runs on `S(x₀, 2h)`; ratios are taken over `S(x₀, h)`.
    pub height: f64,
    /// Radius of a ball `B_r(x₀)` inside `S(x₀, h)` for the ball ratio.
    pub ball_radius: Option<f64>,
    /// Grid cells across the normalized domain.
    pub resolution: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioRow {
    pub sup: f64,
    pub inf: f64,
    /// `+∞` when `inf` vanishes.
    pub ratio: f64,
}

impl RatioRow {
    fn new(sup: f64, inf: f64, tol: f64) -> Self {
        let ratio = if inf <= tol * sup.abs().max(1.0) { f64::INFINITY } else { sup / inf };
        RatioRow { sup, inf, ratio }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HarnackReport {
    pub section: RatioRow,
    pub ball: Option<RatioRow>,
    pub trace_nonnegative: bool,
    pub nodes: usize,
    pub residual: f64,
    pub m_matrix: MMatrixReport,
    /// Solution in normalized coordinates `ξ = T x`.
    pub v: GridFunction,
    pub map: AffineMap,
}

fn gradient(u: &dyn Fn(Point) -> f64, x: Point, step: f64) -> Point {
    [
        (u([x[0] + step, x[1]]) - u([x[0] - step, x[1]])) / (2.0 * step),
        (u([x[0], x[1] + step]) - u([x[0], x[1] - step])) / (2.0 * step),
    ]
}

/// Point where the ray from `x₀` along `d` meets `{w = level}`, for `w` convex with `w(x₀) = 0`.
fn ray_hit(w: &dyn Fn(Point) -> f64, x0: Point, d: Point, level: f64) -> Result<Point> {
    let mut hi = 1e-3;
    while w(geom::add(x0, geom::scale(d, hi))) < level {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Precondition("section is unbounded".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if w(geom::add(x0, geom::scale(d, mid))) < level {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(geom::add(x0, geom::scale(d, 0.5 * (lo + hi))))
}

/// Biquadratic Lagrange interpolation on the 3×3 nodes around `p`.
fn interpolate(v: &GridFunction, p: Point) -> Result<f64> {
    let fx = (p[0] - v.origin[0]) / v.h;
    let fy = (p[1] - v.origin[1]) / v.h;
    let (ci, cj) = (fx.round() as isize, fy.round() as isize);
    let (s, t) = (fx - ci as f64, fy - cj as f64);
    let basis = |x: f64| [0.5 * x * (x - 1.0), 1.0 - x * x, 0.5 * x * (x + 1.0)];
    let (bx, by) = (basis(s), basis(t));
    let mut acc = 0.0;
    for (a, di) in (-1..=1).enumerate() {
        for (b, dj) in (-1..=1).enumerate() {
            let k = v
                .index(ci + di, cj + dj)
                .filter(|&k| v.mask[k] != NodeKind::Exterior)
                .ok_or_else(|| Error::Precondition("evaluation point too close to the solve boundary".into()))?;
            acc += bx[a] * by[b] * v.values[k];
        }
    }
    Ok(acc)
}

/// Extremes of `f` over a closed curve `θ ↦ γ(θ)`: a coarse scan, then golden-section refinement
/// around the four best local extrema.
fn curve_extremes(f: &dyn Fn(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let n = 720;
    let step = std::f64::consts::TAU / n as f64;
    let vals = (0..n).map(|k| f(k as f64 * step)).collect::<Result<Vec<_>>>()?;
    let refine = |sign: f64| -> Result<f64> {
        let mut peaks: Vec<usize> = (0..n)
            .filter(|&k| vals[k] * sign >= vals[(k + n - 1) % n] * sign && vals[k] * sign >= vals[(k + 1) % n] * sign)
            .collect();
        peaks.sort_by(|&a, &b| (vals[b] * sign).total_cmp(&(vals[a] * sign)).then(a.cmp(&b)));
        let mut best = f64::NEG_INFINITY;
        for &k in peaks.iter().take(4) {
            let cur = vals[k] * sign;
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let (mut a, mut b) = ((k as f64 - 1.0) * step, (k as f64 + 1.0) * step);
            let mut c = b - g * (b - a);
            let mut d = a + g * (b - a);
            let (mut fc, mut fd) = (f(c)? * sign, f(d)? * sign);
            for _ in 0..80 {
                if fc > fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - g * (b - a);
                    fc = f(c)? * sign;
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + g * (b - a);
                    fd = f(d)? * sign;
                }
            }
            best = best.max(cur).max(fc).max(fd);
        }
        Ok(best * sign)
    };
    Ok((refine(1.0)?, refine(-1.0)?))
}

pub fn harnack_probe(input: &HarnackInput, tol: &Tolerances) -> Result<HarnackReport> {
    if !(input.height > 0.0) {
        return Err(Error::InvalidArgument("section height must be positive".into()));
    }
    let x0 = input.center;
    let u = input.u;
    let p = gradient(u, x0, 1e-4);
    let u0 = u(x0);
    let w = move |y: Point| u(y) - u0 - geom::dot(p, geom::sub(y, x0));
    let dirs = 256;
    let polygon = (0..dirs)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / dirs as f64;
            ray_hit(&w, x0, [a.cos(), a.sin()], 2.0 * input.height)
        })
        .collect::<Result<Vec<_>>>()?;
    let trace_nonnegative = polygon.iter().all(|&b| (input.trace)(b) >= -tol.ineq);
    let section = ConvexDomain::new(geom::convex_hull(&polygon), tol.geom)?;
    let (map, _) = john::normalize(&section, tol)?;
    let back = map.inverse()?;
    let n = input.resolution.max(8);
    let half = 2.2;
    let hx = 2.0 * half / n as f64;
    let dims = [n + 1, n + 1];
    let origin = [-half, -half];
    let level = 2.0 * input.height;
    let ut = GridFunction::region(origin, hx, dims, |xi| w(back.apply(xi)) < level, |xi| u(back.apply(xi)))?;
    let bc = ut.with_values(|xi| (input.trace)(back.apply(xi)));
    let zero = ut.with_values(|_| 0.0);
    let solved = linma::solve_linma(&ut, &zero, &bc, tol)?;
    let v = solved.v;

    let eval_x = |x: Point| interpolate(&v, map.apply(x));
    let half_curve = |a: f64| -> Result<f64> { eval_x(ray_hit(&w, x0, [a.cos(), a.sin()], input.height)?) };
    let (mut sup, mut inf) = curve_extremes(&half_curve)?;
    for k in v.interior() {
        if w(back.apply(v.point(k))) < input.height {
            sup = sup.max(v.values[k]);
            inf = inf.min(v.values[k]);
        }
    }
    let section_row = RatioRow::new(sup, inf, tol.ineq);
    let ball = match input.ball_radius {
        Some(r) => {
            let circle = |a: f64| eval_x(geom::add(x0, [r * a.cos(), r * a.sin()]));
            let (mut bsup, mut binf) = curve_extremes(&circle)?;
            for k in v.interior() {
                if geom::dist(back.apply(v.point(k)), x0) < r {
                    bsup = bsup.max(v.values[k]);
                    binf = binf.min(v.values[k]);
                }
            }
            Some(RatioRow::new(bsup, binf, tol.ineq))
        }
        None => None,
    };
    Ok(HarnackReport {
        section: section_row,
        ball,
        trace_nonnegative,
        nodes: v.interior().len(),
        residual: solved.residual_norm,
        m_matrix: solved.m_matrix,
        v,
        map,
    })
}

/// The eccentric pair `u = x₁²/(2ε) + εx₂²/2`, `v = x₁²/(2ε) − εx₂²/2 + 1`, with `L_u v = 0`.
pub fn eccentric_pair(eps: f64) -> (impl Fn(Point) -> f64, impl Fn(Point) -> f64) {
    (
        move |x: Point| x[0] * x[0] / (2.0 * eps) + eps * x[1] * x[1] / 2.0,
        move |x: Point| x[0] * x[0] / (2.0 * eps) - eps * x[1] * x[1] / 2.0 + 1.0,
    )
}
