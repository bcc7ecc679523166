//! Maximum-volume inscribed ellipses and the normalization they induce.

use std::f64::consts::PI;

use log::debug;
use nalgebra::{Matrix5, Vector5};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, ConvexDomain, Point};
use crate::sym2::SymmetricMatrix2;
use crate::tol::Tolerances;

/// `{x : (x−c)ᵗ shape (x−c) ≤ 1}`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EllipsoidRepr", into = "EllipsoidRepr")]
pub struct Ellipsoid {
    pub center: Point,
    pub shape: SymmetricMatrix2,
}

#[derive(Serialize, Deserialize)]
struct EllipsoidRepr {
    center: Point,
    shape: [[f64; 2]; 2],
}

impl TryFrom<EllipsoidRepr> for Ellipsoid {
    type Error = Error;
    fn try_from(r: EllipsoidRepr) -> Result<Self> {
        if r.shape[0][1] != r.shape[1][0] {
            return Err(Error::InvalidArgument("ellipsoid shape must be symmetric".into()));
        }
        Ellipsoid::new(r.center, SymmetricMatrix2::new(r.shape[0][0], r.shape[0][1], r.shape[1][1]))
    }
}

impl From<Ellipsoid> for EllipsoidRepr {
    fn from(e: Ellipsoid) -> Self {
        EllipsoidRepr { center: e.center, shape: e.shape.as_rows() }
    }
}

impl Ellipsoid {
    pub fn new(center: Point, shape: SymmetricMatrix2) -> Result<Self> {
        if !shape.is_pd(0.0) {
            return Err(Error::InvalidArgument("ellipsoid shape must be positive definite".into()));
        }
        Ok(Ellipsoid { center, shape })
    }

    /// `E = c + B(unit disk)` with `B = shape^{-1/2}`.
    pub fn from_root(center: Point, b: SymmetricMatrix2) -> Result<Self> {
        let inv = b.inverse().ok_or_else(|| Error::Degenerate("singular ellipse root".into()))?;
        Ellipsoid::new(center, SymmetricMatrix2::new(
            inv.a11 * inv.a11 + inv.a12 * inv.a12,
            inv.a11 * inv.a12 + inv.a12 * inv.a22,
            inv.a12 * inv.a12 + inv.a22 * inv.a22,
        ))
    }

    pub fn root(&self) -> SymmetricMatrix2 {
        self.shape.inverse().expect("positive definite").sqrt()
    }

    pub fn volume(&self) -> f64 {
        PI / self.shape.det().sqrt()
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        self.shape.quad(geom::sub(p, self.center)) <= 1.0 + tol
    }

    /// Support function `max_{x∈E} a·x`.
    pub fn support(&self, a: Point) -> f64 {
        geom::dot(a, self.center) + geom::norm(self.root().apply(a))
    }
}

/// Affine map `x ↦ A x + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub a: [[f64; 2]; 2],
    pub b: Point,
}

impl AffineMap {
    pub fn apply(&self, x: Point) -> Point {
        [
            self.a[0][0] * x[0] + self.a[0][1] * x[1] + self.b[0],
            self.a[1][0] * x[0] + self.a[1][1] * x[1] + self.b[1],
        ]
    }

    pub fn det(&self) -> f64 {
        self.a[0][0] * self.a[1][1] - self.a[0][1] * self.a[1][0]
    }

    pub fn inverse(&self) -> Result<AffineMap> {
        let d = self.det();
        if d == 0.0 {
            return Err(Error::Degenerate("singular affine map".into()));
        }
        let a = [[self.a[1][1] / d, -self.a[0][1] / d], [-self.a[1][0] / d, self.a[0][0] / d]];
        let b = [-(a[0][0] * self.b[0] + a[0][1] * self.b[1]), -(a[1][0] * self.b[0] + a[1][1] * self.b[1])];
        Ok(AffineMap { a, b })
    }
}

// variables: (b11, b12, b22, c1, c2) with E = c + B(disk)
fn root_jacobian(a: Point) -> [[f64; 3]; 2] {
    [[a[0], a[1], 0.0], [0.0, a[0], a[1]]]
}

struct Barrier<'a> {
    planes: &'a [(Point, f64)],
}

impl Barrier<'_> {
    fn feasible(&self, x: &Vector5<f64>) -> bool {
        let b = SymmetricMatrix2::new(x[0], x[1], x[2]);
        b.is_pd(0.0) && self.planes.iter().all(|&(a, rhs)| self.slack(x, a, rhs) > 0.0)
    }

    fn slack(&self, x: &Vector5<f64>, a: Point, rhs: f64) -> f64 {
        let v = SymmetricMatrix2::new(x[0], x[1], x[2]).apply(a);
        rhs - a[0] * x[3] - a[1] * x[4] - geom::norm(v)
    }

    /// Value, gradient and Hessian of `t·(−log det B) − Σ log slack`.
    fn eval(&self, x: &Vector5<f64>, t: f64) -> (f64, Vector5<f64>, Matrix5<f64>) {
        let d = x[0] * x[2] - x[1] * x[1];
        let gd = Vector5::new(x[2], -2.0 * x[1], x[0], 0.0, 0.0);
        let mut hd = Matrix5::zeros();
        hd[(0, 2)] = 1.0;
        hd[(2, 0)] = 1.0;
        hd[(1, 1)] = -2.0;
        let mut f = -t * d.ln();
        let mut g = -gd * (t / d);
        let mut hm = (gd * gd.transpose()) * (t / (d * d)) - hd * (t / d);
        for &(a, rhs) in self.planes {
            let v = SymmetricMatrix2::new(x[0], x[1], x[2]).apply(a);
            let s = geom::norm(v);
            let r = rhs - a[0] * x[3] - a[1] * x[4] - s;
            let j = root_jacobian(a);
            let mut gr = Vector5::zeros();
            for k in 0..3 {
                gr[k] = -(j[0][k] * v[0] + j[1][k] * v[1]) / s;
            }
            gr[3] = -a[0];
            gr[4] = -a[1];
            // Hessian of s on the root block: Jᵗ (I/s − v vᵗ/s³) J
            let p = [[1.0 / s - v[0] * v[0] / s.powi(3), -v[0] * v[1] / s.powi(3)], [-v[0] * v[1] / s.powi(3), 1.0 / s - v[1] * v[1] / s.powi(3)]];
            let mut hs = Matrix5::zeros();
            for k in 0..3 {
                for l in 0..3 {
                    let mut acc = 0.0;
                    for m in 0..2 {
                        for q in 0..2 {
                            acc += j[m][k] * p[m][q] * j[q][l];
                        }
                    }
                    hs[(k, l)] = acc;
                }
            }
            f -= r.ln();
            g -= gr / r;
            hm += (gr * gr.transpose()) / (r * r) + hs / r;
        }
        (f, g, hm)
    }
}

/// Maximum-volume ellipse inside a convex polygon, by a log-barrier path with damped Newton steps.
pub fn john_ellipsoid(k: &ConvexDomain, tol: &Tolerances) -> Result<Ellipsoid> {
    let scale = k.diameter();
    if !(k.area() > 1e-12 * scale * scale) {
        return Err(Error::Degenerate("polygon has no interior".into()));
    }
    let c0 = geom::polygon_centroid(k.vertices());
    let r0 = 0.5 * k.boundary_distance(c0);
    let barrier = Barrier { planes: k.half_planes() };
    let mut x = Vector5::new(r0, 0.0, r0, c0[0], c0[1]);
    let m = k.half_planes().len() as f64;
    let mut t = 1.0;
    let mut steps = 0;
    loop {
        for _ in 0..200 {
            let (f, g, hm) = barrier.eval(&x, t);
            let Some(dx) = hm.cholesky().map(|c| c.solve(&(-g))) else {
                return Err(Error::NoConvergence { iterations: steps, residual: g.norm() });
            };
            let dec2 = -g.dot(&dx);
            steps += 1;
            if dec2.sqrt() < 1e-8 {
                break;
            }
            let mut s = 1.0;
            loop {
                let y = x + dx * s;
                if barrier.feasible(&y) && barrier.eval(&y, t).0 <= f - 0.25 * s * dec2 {
                    x = y;
                    break;
                }
                s *= 0.5;
                if s < 1e-20 {
                    return Err(Error::NoConvergence { iterations: steps, residual: dec2 });
                }
            }
        }
        if m / t < 1e-13 {
            break;
        }
        t *= 8.0;
    }
    debug!("john ellipsoid: {steps} Newton steps");
    let e = Ellipsoid::from_root([x[3], x[4]], SymmetricMatrix2::new(x[0], x[1], x[2]))?;
    check_containments(k, &e, tol)?;
    Ok(e)
}

/// `E ⊂ K` within `tol.geom` and `K ⊂ c + 2(E − c)` within `tol.ineq`.
pub fn check_containments(k: &ConvexDomain, e: &Ellipsoid, tol: &Tolerances) -> Result<()> {
    let scale = k.diameter();
    for &(a, rhs) in k.half_planes() {
        let s = e.support(a);
        if s > rhs + tol.geom.max(1e-10) * scale {
            return Err(Error::Precondition(format!("ellipse leaves the polygon by {}", s - rhs)));
        }
    }
    let dilated = Ellipsoid { center: e.center, shape: e.shape.scaled(0.25) };
    for &v in k.vertices() {
        if !dilated.contains(v, tol.ineq) {
            return Err(Error::Precondition("polygon vertex outside the dilated ellipse".into()));
        }
    }
    Ok(())
}

/// Affine `T` sending the John ellipse to the unit disk, and `T(K)`, with `B₁ ⊂ T(K) ⊂ B₂` checked.
pub fn normalize(k: &ConvexDomain, tol: &Tolerances) -> Result<(AffineMap, ConvexDomain)> {
    let e = john_ellipsoid(k, tol)?;
    let inv = e.root().inverse().ok_or_else(|| Error::Degenerate("singular John ellipse".into()))?;
    let a = inv.as_rows();
    let c = inv.apply(e.center);
    let map = AffineMap { a, b: [-c[0], -c[1]] };
    let verts: Vec<Point> = k.vertices().iter().map(|&v| map.apply(v)).collect();
    let out = ConvexDomain::new(verts, tol.geom)?;
    if out.boundary_distance([0.0, 0.0]) < 1.0 - tol.ineq.max(1e-10) {
        return Err(Error::Precondition("unit disk not inside the normalized domain".into()));
    }
    if out.vertices().iter().any(|v| geom::norm(*v) > 2.0 + tol.ineq) {
        return Err(Error::Precondition("normalized domain leaves the disk of radius 2".into()));
    }
    Ok((map, out))
}

/// Random convex polygon: hull of points on a perturbed circle.
pub fn random_polygon(rng: &mut impl rand::Rng, n: usize) -> ConvexDomain {
    loop {
        let pts: Vec<Point> = (0..n)
            .map(|_| {
                let a: f64 = rng.gen_range(0.0..2.0 * PI);
                let r: f64 = rng.gen_range(0.3..1.0);
                [r * a.cos() * rng.gen_range(0.5..2.0), r * a.sin()]
            })
            .collect();
        let hull = geom::convex_hull(&pts);
        if hull.len() >= 3 {
            if let Ok(d) = ConvexDomain::new(hull, 1e-12) {
                if d.area() > 0.05 {
                    return d;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn square_gives_incircle() {
        let e = john_ellipsoid(&ConvexDomain::square(1.0), &Tolerances::default()).unwrap();
        assert!(geom::norm(e.center) < 1e-6);
        assert!((e.shape.a11 - 1.0).abs() < 1e-6 && e.shape.a12.abs() < 1e-6 && (e.shape.a22 - 1.0).abs() < 1e-6);
        let (map, _) = normalize(&ConvexDomain::square(1.0), &Tolerances::default()).unwrap();
        assert!((map.a[0][0] - 1.0).abs() < 1e-6 && map.a[0][1].abs() < 1e-6 && (map.a[1][1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn polygonal_disk_and_ellipse() {
        let e = john_ellipsoid(&ConvexDomain::regular(128, 1.0), &Tolerances::default()).unwrap();
        assert!(geom::norm(e.center) < 1e-3 && (e.shape.a11 - 1.0).abs() < 1e-3 && (e.shape.a22 - 1.0).abs() < 1e-3);
        let verts = ConvexDomain::regular(128, 1.0).vertices().iter().map(|v| [2.0 * v[0], v[1]]).collect();
        let k = ConvexDomain::new(verts, 1e-12).unwrap();
        let (map, out) = normalize(&k, &Tolerances::default()).unwrap();
        assert!((map.a[0][0] - 0.5).abs() < 2e-3 && (map.a[1][1] - 1.0).abs() < 2e-3 && map.a[0][1].abs() < 1e-3);
        assert!(out.vertices().iter().all(|v| (geom::norm(*v) - 1.0).abs() < 2e-3));
    }

    #[test]
    fn triangle_gives_steiner_inellipse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let k = random_polygon(&mut rng, 3);
            let e = john_ellipsoid(&k, &Tolerances::default()).unwrap();
            let g = geom::polygon_centroid(k.vertices());
            assert!(geom::dist(e.center, g) < 1e-6);
            let steiner = PI / (3.0 * 3f64.sqrt()) * k.area();
            assert!((e.volume() - steiner).abs() < 1e-6 * steiner);
        }
    }

    #[test]
    fn brute_force_search_does_not_beat_it() {
        let k = ConvexDomain::new(vec![[0.0, 0.0], [3.0, 0.2], [2.0, 1.5], [0.4, 1.2]], 1e-12).unwrap();
        let e = john_ellipsoid(&k, &Tolerances::default()).unwrap();
        // (c1, c2, angle, log aspect) -> area of the largest fitting ellipse of that form
        let area = |q: [f64; 4]| {
            let c = [q[0], q[1]];
            if k.boundary_distance(c) <= 0.0 {
                return 0.0;
            }
            let (co, si, ratio) = (q[2].cos(), q[2].sin(), q[3].exp());
            let b0 = SymmetricMatrix2::new(ratio * co * co + si * si, (ratio - 1.0) * co * si, ratio * si * si + co * co);
            let s = k.half_planes().iter().map(|&(a, r)| (r - geom::dot(a, c)) / geom::norm(b0.apply(a))).fold(f64::INFINITY, f64::min);
            PI * s * s * b0.det()
        };
        let mut best = [0.0; 4];
        let n = 12;
        for i in 0..=n {
            for j in 0..=n {
                for ang in 0..12 {
                    for ar in -6..=6 {
                        let q = [3.0 * i as f64 / n as f64, 1.5 * j as f64 / n as f64, PI * ang as f64 / 12.0, ar as f64 / 3.0];
                        if area(q) > area(best) {
                            best = q;
                        }
                    }
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for it in 0..6000 {
            let scale = 0.2 * 0.998f64.powi(it);
            let q = best.map(|v| v + scale * rng.gen_range(-1.0..1.0));
            if area(q) > area(best) {
                best = q;
            }
        }
        assert!(area(best) <= e.volume() * (1.0 + 1e-9));
        assert!(area(best) >= 0.99 * e.volume(), "{} {}", area(best), e.volume());
    }

    #[test]
    fn local_maximum_under_perturbation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let k = random_polygon(&mut rng, 7);
        let e = john_ellipsoid(&k, &Tolerances::default()).unwrap();
        let b = e.root();
        for _ in 0..50 {
            let d = 1e-3;
            let nb = SymmetricMatrix2::new(b.a11 + rng.gen_range(-d..d), b.a12 + rng.gen_range(-d..d), b.a22 + rng.gen_range(-d..d));
            let nc = [e.center[0] + rng.gen_range(-d..d), e.center[1] + rng.gen_range(-d..d)];
            // shrink into the polygon when the perturbation leaves it
            let s = k.half_planes().iter().map(|&(a, r)| (r - geom::dot(a, nc)) / geom::norm(nb.apply(a))).fold(1.0, f64::min);
            let p = Ellipsoid::from_root(nc, nb.scaled(s)).unwrap();
            assert!(p.volume() <= e.volume() * (1.0 + 1e-6));
        }
    }

    #[test]
    fn random_containments_and_json() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let k = random_polygon(&mut rng, 9);
            normalize(&k, &Tolerances::default()).unwrap();
        }
        let e = Ellipsoid::new([1.0, 2.0], SymmetricMatrix2::new(2.0, 0.5, 1.0)).unwrap();
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(s, r#"{"center":[1.0,2.0],"shape":[[2.0,0.5],[0.5,1.0]]}"#);
        assert_eq!(serde_json::from_str::<Ellipsoid>(&s).unwrap(), e);
    }
}
