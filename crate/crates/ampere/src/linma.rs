//! Finite differences for the linearized Monge-Ampère operator `U^{ij} v_ij`.

use std::f64::consts::PI;

use log::debug;
use serde::Serialize;

use crate::envelope::{Envelope, VertexState};
use crate::error::{Error, Result};
use crate::geom::{self, Point};
use crate::grid::{GridFunction, NodeKind};
use crate::sparse::CsrBuilder;
use crate::sym2::SymmetricMatrix2;
use crate::tol::Tolerances;

/// Second differences at an interior node; the mixed term uses the four diagonal neighbors.
pub fn hessian_at(u: &GridFunction, k: usize) -> SymmetricMatrix2 {
    let h2 = u.h * u.h;
    let c = u.values[k];
    let a11 = (u.at(k, 1, 0) - 2.0 * c + u.at(k, -1, 0)) / h2;
    let a22 = (u.at(k, 0, 1) - 2.0 * c + u.at(k, 0, -1)) / h2;
    let a12 = (u.at(k, 1, 1) - u.at(k, 1, -1) - u.at(k, -1, 1) + u.at(k, -1, -1)) / (4.0 * h2);
    SymmetricMatrix2::new(a11, a12, a22)
}

/// Discrete Hessian at every interior node, in the order of [`GridFunction::interior`].
pub fn discrete_hessian(u: &GridFunction) -> Vec<SymmetricMatrix2> {
    u.interior().into_iter().map(|k| hessian_at(u, k)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CofactorField {
    pub nodes: Vec<usize>,
    pub cofactor: Vec<SymmetricMatrix2>,
    /// Interior nodes whose discrete Hessian is not positive semidefinite.
    pub non_psd: Vec<usize>,
}

pub fn cofactor_field(u: &GridFunction, tol_psd: f64) -> CofactorField {
    let nodes = u.interior();
    let mut cofactor = Vec::with_capacity(nodes.len());
    let mut non_psd = Vec::new();
    for &k in &nodes {
        let hsn = hessian_at(u, k);
        if !hsn.is_psd(tol_psd) {
            non_psd.push(k);
        }
        cofactor.push(hsn.cofactor());
    }
    CofactorField { nodes, cofactor, non_psd }
}

/// Central-difference divergence of the rows of the cofactor matrix, at interior nodes whose
/// four axis neighbors are interior. Returns the node and the Euclidean norm.
pub fn divergence_free_residual(u: &GridFunction) -> Vec<(usize, f64)> {
    let n = u.len();
    let mut cof: Vec<Option<SymmetricMatrix2>> = vec![None; n];
    for k in u.interior() {
        cof[k] = Some(hessian_at(u, k).cofactor());
    }
    let h = u.h;
    let mut out = Vec::new();
    for k in u.interior() {
        let (i, j) = u.ij(k);
        let get = |di: isize, dj: isize| u.index(i as isize + di, j as isize + dj).and_then(|m| cof[m]);
        let (Some(e), Some(w), Some(nn), Some(s)) = (get(1, 0), get(-1, 0), get(0, 1), get(0, -1)) else {
            continue;
        };
        let d1 = (e.a11 - w.a11) / (2.0 * h) + (nn.a12 - s.a12) / (2.0 * h);
        let d2 = (e.a12 - w.a12) / (2.0 * h) + (nn.a22 - s.a22) / (2.0 * h);
        out.push((k, d1.hypot(d2)));
    }
    out
}

/// Largest entry of a residual list among nodes with `|x|_∞ ≤ r`; a fixed window keeps the
/// maximizer from drifting with the grid.
pub fn max_residual_within(u: &GridFunction, residual: &[(usize, f64)], r: f64) -> f64 {
    residual
        .iter()
        .filter(|(k, _)| {
            let p = u.point(*k);
            p[0].abs().max(p[1].abs()) <= r + 1e-12
        })
        .map(|e| e.1)
        .fold(0.0, f64::max)
}

/// Coefficients of `a11 D11 + 2 a12 D12 + a22 D22` on the 3×3 neighborhood, indexed by
/// `(di, dj)` offsets.
pub fn stencil(a: &SymmetricMatrix2, h: f64) -> [((isize, isize), f64); 9] {
    let h2 = h * h;
    let x = a.a12 / (2.0 * h2);
    [
        ((0, 0), -2.0 * (a.a11 + a.a22) / h2),
        ((1, 0), a.a11 / h2),
        ((-1, 0), a.a11 / h2),
        ((0, 1), a.a22 / h2),
        ((0, -1), a.a22 / h2),
        ((1, 1), x),
        ((-1, -1), x),
        ((1, -1), -x),
        ((-1, 1), -x),
    ]
}

/// Apply the operator with coefficients `a` (one per interior node) to `v`.
pub fn apply_operator(a: &[SymmetricMatrix2], v: &GridFunction) -> Vec<f64> {
    v.interior()
        .iter()
        .zip(a)
        .map(|(&k, c)| stencil(c, v.h).iter().map(|&((di, dj), w)| w * v.at(k, di, dj)).sum())
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct MMatrixReport {
    /// Rows with a negative off-diagonal weight (a nonzero mixed coefficient).
    pub violating_rows: usize,
    pub monotone: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LinearSolveReport {
    pub v: GridFunction,
    pub residual_norm: f64,
    pub iterations: usize,
    pub m_matrix: MMatrixReport,
}

/// Solve `U^{ij} v_ij = g` at the interior nodes of `u`, with `v` equal to `bc` on boundary nodes.
pub fn solve_linma(u: &GridFunction, g: &GridFunction, bc: &GridFunction, tol: &Tolerances) -> Result<LinearSolveReport> {
    let cof = cofactor_field(u, tol.psd);
    if !cof.non_psd.is_empty() {
        return Err(Error::DegenerateHessian(cof.non_psd.len()));
    }
    solve_with_coefficients(&cof.cofactor, u, g, bc, tol)
}

/// As [`solve_linma`] with explicit coefficients per interior node.
pub fn solve_with_coefficients(
    a: &[SymmetricMatrix2],
    grid: &GridFunction,
    g: &GridFunction,
    bc: &GridFunction,
    tol: &Tolerances,
) -> Result<LinearSolveReport> {
    if !grid.same_grid(g) || !grid.same_grid(bc) {
        return Err(Error::InvalidArgument("grids differ".into()));
    }
    let nodes = grid.interior();
    if a.len() != nodes.len() {
        return Err(Error::InvalidArgument("one coefficient per interior node expected".into()));
    }
    let mut slot = vec![usize::MAX; grid.len()];
    for (r, &k) in nodes.iter().enumerate() {
        slot[k] = r;
    }
    let n = nodes.len();
    let mut mat = CsrBuilder::new(n);
    let mut rhs = vec![0.0; n];
    let mut violating = 0;
    let scale = a.iter().map(|c| c.a11.abs().max(c.a22.abs())).fold(0.0, f64::max);
    for (r, &k) in nodes.iter().enumerate() {
        rhs[r] = g.values[k];
        if a[r].a12.abs() > 1e-14 * scale {
            violating += 1;
        }
        let (i, j) = grid.ij(k);
        for ((di, dj), w) in stencil(&a[r], grid.h) {
            if w == 0.0 {
                continue;
            }
            let m = grid.index(i as isize + di, j as isize + dj).ok_or(Error::Stencil(k))?;
            match grid.mask[m] {
                NodeKind::Interior => mat.add(r, slot[m], w),
                NodeKind::Boundary => rhs[r] -= w * bc.values[m],
                NodeKind::Exterior => return Err(Error::Stencil(k)),
            }
        }
    }
    let mat = mat.build();
    let rim = grid.boundary();
    let start = if rim.is_empty() { 0.0 } else { rim.iter().map(|&k| bc.values[k]).sum::<f64>() / rim.len() as f64 };
    let mut x = vec![start; n];
    let stats = mat.gmres(&rhs, &mut x, tol.lin, tol.abs, 10_000, 60)?;
    debug!("linma solve: {n} unknowns, {} iterations, residual {:e}", stats.iterations, stats.residual);
    let mut v = bc.clone();
    for (r, &k) in nodes.iter().enumerate() {
        v.values[k] = x[r];
    }
    for k in 0..v.len() {
        if v.mask[k] == NodeKind::Exterior {
            v.values[k] = 0.0;
        }
    }
    Ok(LinearSolveReport {
        v,
        residual_norm: stats.residual,
        iterations: stats.iterations,
        m_matrix: MMatrixReport { violating_rows: violating, monotone: violating == 0 },
    })
}

/// `C(2) = 2/ω₂`, from the John normalization `B₁ ⊂ T(Ω) ⊂ B₂` in the plane.
pub const ABP_CONSTANT: f64 = 2.0 / PI;

#[derive(Debug, Clone, Serialize)]
pub struct AbpVerdict {
    pub sup_interior: f64,
    pub sup_boundary: f64,
    pub contact_nodes: usize,
    /// `C(2)|Ω|^{1/2} ‖g/(det a)^{1/2}‖_{L²(contact set)}`
    pub forcing_term: f64,
    pub pass: bool,
}

/// ABP bound for `a^{ij} v_ij = g` with the norm taken over the discrete upper contact set.
pub fn abp_check(a: &[SymmetricMatrix2], v: &GridFunction, g: &[f64], tol: &Tolerances) -> Result<AbpVerdict> {
    let nodes = v.interior();
    if a.len() != nodes.len() || g.len() != nodes.len() {
        return Err(Error::InvalidArgument("one coefficient and right-hand side per interior node expected".into()));
    }
    if let Some(c) = a.iter().find(|c| !(c.det() > 0.0)) {
        return Err(Error::Precondition(format!("coefficient determinant {} is not positive", c.det())));
    }
    let active: Vec<usize> = (0..v.len()).filter(|&k| v.mask[k] != NodeKind::Exterior).collect();
    let pts: Vec<Point> = active.iter().map(|&k| v.point(k)).collect();
    let neg: Vec<f64> = active.iter().map(|&k| -v.values[k]).collect();
    let env = Envelope::build(&pts, &neg)?;
    let mut contact = vec![false; v.len()];
    for (idx, &k) in active.iter().enumerate() {
        contact[k] = env.state()[idx] == VertexState::Active;
    }
    let area = geom::polygon_area(&geom::convex_hull(&pts));
    let h2 = v.h * v.h;
    let mut norm2 = 0.0;
    let mut count = 0;
    for (r, &k) in nodes.iter().enumerate() {
        if contact[k] {
            count += 1;
            norm2 += g[r] * g[r] / a[r].det() * h2;
        }
    }
    let forcing_term = ABP_CONSTANT * area.sqrt() * norm2.sqrt();
    let sup_interior = nodes.iter().map(|&k| v.values[k]).fold(f64::NEG_INFINITY, f64::max);
    let sup_boundary = v.boundary().iter().map(|&k| v.values[k]).fold(f64::NEG_INFINITY, f64::max);
    let rhs = sup_boundary + forcing_term;
    let pass = sup_interior <= rhs + tol.ineq * rhs.abs().max(1.0);
    Ok(AbpVerdict { sup_interior, sup_boundary, contact_nodes: count, forcing_term, pass })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExponentFit {
    pub exponent: f64,
    pub seminorm: f64,
    /// `(distance, oscillation)` per dyadic bin, upper envelope.
    pub bins: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HoelderReport {
    pub interior: ExponentFit,
    pub boundary: ExponentFit,
}

fn least_squares_slope(xy: &[(f64, f64)]) -> f64 {
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn fit_pairs(v: &GridFunction, anchors: &[usize], others: &[usize]) -> Result<ExponentFit> {
    let h = v.h;
    let mut best: Vec<(f64, f64)> = Vec::new();
    let mut all = Vec::new();
    for &a in anchors {
        let pa = v.point(a);
        for &b in others {
            if b == a {
                continue;
            }
            let d = geom::dist(pa, v.point(b));
            let osc = (v.values[a] - v.values[b]).abs();
            let bin = ((d / h).log2().floor().max(0.0)) as usize;
            if best.len() <= bin {
                best.resize(bin + 1, (0.0, 0.0));
            }
            if osc > best[bin].1 {
                best[bin] = (d, osc);
            }
            all.push((d, osc));
        }
    }
    let bins: Vec<(f64, f64)> = best.into_iter().filter(|b| b.1 > 0.0).collect();
    if bins.len() < 3 {
        return Err(Error::Precondition(format!("only {} distance bins", bins.len())));
    }
    let logs: Vec<(f64, f64)> = bins.iter().map(|&(d, o)| (d.ln(), o.ln())).collect();
    let exponent = least_squares_slope(&logs).min(1.0);
    let seminorm = all.iter().map(|&(d, o)| o / d.powf(exponent)).fold(0.0, f64::max);
    Ok(ExponentFit { exponent, seminorm, bins })
}

/// Hölder exponent from the upper envelope of `|v(x) − v(y)|` over dyadic distance bins,
/// for pairs of interior nodes and for pairs anchored at boundary nodes.
pub fn hoelder_probe(v: &GridFunction) -> Result<HoelderReport> {
    let stride = |s: &[usize], cap: usize| -> Vec<usize> {
        let step = (s.len() / cap).max(1);
        s.iter().step_by(step).copied().collect()
    };
    let interior = v.interior();
    let boundary = v.boundary();
    let anchors = stride(&interior, 400);
    Ok(HoelderReport {
        interior: fit_pairs(v, &anchors, &interior)?,
        boundary: fit_pairs(v, &stride(&boundary, 200), &interior)?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OscillationDecay {
    /// `(height, oscillation)` per section.
    pub samples: Vec<(f64, f64)>,
    /// Fitted exponent of `osc ~ height^α`.
    pub alpha: f64,
}

/// Oscillation of `v` over the node sets of the sections `S_u(x₀, ρ)` of a convex grid function,
/// for an interior node `x₀` and the given heights.
pub fn oscillation_decay(u: &GridFunction, v: &GridFunction, center: usize, heights: &[f64]) -> Result<OscillationDecay> {
    if u.mask[center] != NodeKind::Interior {
        return Err(Error::InvalidArgument("section center must be an interior node".into()));
    }
    let slope = [
        (u.at(center, 1, 0) - u.at(center, -1, 0)) / (2.0 * u.h),
        (u.at(center, 0, 1) - u.at(center, 0, -1)) / (2.0 * u.h),
    ];
    let x0 = u.point(center);
    let u0 = u.values[center];
    let mut samples = Vec::new();
    for &rho in heights {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..u.len() {
            if u.mask[k] == NodeKind::Exterior {
                continue;
            }
            let x = u.point(k);
            if u.values[k] < u0 + geom::dot(slope, geom::sub(x, x0)) + rho {
                lo = lo.min(v.values[k]);
                hi = hi.max(v.values[k]);
            }
        }
        samples.push((rho, hi - lo));
    }
    let logs: Vec<(f64, f64)> = samples.iter().filter(|s| s.1 > 0.0).map(|&(r, o)| (r.ln(), o.ln())).collect();
    if logs.len() < 2 {
        return Err(Error::Precondition("too few sections with positive oscillation".into()));
    }
    Ok(OscillationDecay { alpha: least_squares_slope(&logs), samples })
}

/// `Σ (det D²u)^{1/4} h²` over interior nodes (midpoint rule on cell-centered grids).
pub fn affine_area(u: &GridFunction) -> Result<f64> {
    let h2 = u.h * u.h;
    let mut s = 0.0;
    for k in u.interior() {
        let d = hessian_at(u, k).det();
        if !(d > 0.0) {
            return Err(Error::DegenerateHessian(1));
        }
        s += d.powf(0.25) * h2;
    }
    Ok(s)
}

/// Discrete second divergence `Σ ∂_ij (w U^{ij})`, `w = (det D²u)^{-3/4}`, assembled as the
/// adjoint of the Hessian stencils; defined at every non-exterior node.
pub fn el_operator(u: &GridFunction) -> Result<GridFunction> {
    let mut out = u.with_values(|_| 0.0);
    for k in u.interior() {
        let hsn = hessian_at(u, k);
        let d = hsn.det();
        if !(d > 0.0) {
            return Err(Error::DegenerateHessian(1));
        }
        let wu = hsn.cofactor().scaled(d.powf(-0.75));
        let (i, j) = u.ij(k);
        for ((di, dj), c) in stencil(&wu, u.h) {
            let m = u.index(i as isize + di, j as isize + dj).ok_or(Error::Stencil(k))?;
            out.values[m] += c;
        }
    }
    Ok(out)
}
