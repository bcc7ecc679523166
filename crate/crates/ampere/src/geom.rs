//! Planar primitives: points, exact orientation, hulls and convex polygons.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[inline]
pub fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn scale(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s]
}

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    norm(sub(a, b))
}

#[inline]
pub fn lerp(a: Point, b: Point, t: f64) -> Point {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

/// Exact sign of the orientation of (a, b, c); positive when counterclockwise.
#[inline]
pub fn orient2d(a: Point, b: Point, c: Point) -> f64 {
    robust::orient2d(
        robust::Coord { x: a[0], y: a[1] },
        robust::Coord { x: b[0], y: b[1] },
        robust::Coord { x: c[0], y: c[1] },
    )
}

/// Positive when `d` lies strictly below the plane through the lifted `a, b, c`
/// (with `a, b, c` counterclockwise in the plane).
#[inline]
pub fn orient3d(a: [f64; 3], b: [f64; 3], c: [f64; 3], d: [f64; 3]) -> f64 {
    let p = |q: [f64; 3]| robust::Coord3D { x: q[0], y: q[1], z: q[2] };
    robust::orient3d(p(a), p(b), p(c), p(d))
}

pub fn triangle_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * cross(sub(b, a), sub(c, a))
}

/// Signed shoelace area.
pub fn polygon_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        s += cross(poly[i], poly[(i + 1) % n]);
    }
    0.5 * s
}

pub fn polygon_centroid(poly: &[Point]) -> Point {
    let a = polygon_area(poly);
    let diam = diameter(poly);
    if a.abs() <= 1e-12 * diam * diam || a.abs() < 1e-300 {
        let n = poly.len().max(1) as f64;
        let s = poly.iter().fold([0.0, 0.0], |acc, &p| add(acc, p));
        return scale(s, 1.0 / n);
    }
    let n = poly.len();
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        let c = cross(p, q);
        cx += (p[0] + q[0]) * c;
        cy += (p[1] + q[1]) * c;
    }
    [cx / (6.0 * a), cy / (6.0 * a)]
}

/// Convex hull by monotone chain, counterclockwise, collinear points dropped.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Point> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && orient2d(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && orient2d(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Indices of strict hull corners, counterclockwise.
pub fn convex_hull_indices(points: &[Point]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| {
        points[a][0]
            .total_cmp(&points[b][0])
            .then(points[a][1].total_cmp(&points[b][1]))
    });
    idx.dedup_by(|a, b| points[*a] == points[*b]);
    if idx.len() < 3 {
        return idx;
    }
    let build = |order: &mut dyn Iterator<Item = usize>| {
        let mut h: Vec<usize> = Vec::new();
        for i in order {
            while h.len() >= 2
                && orient2d(points[h[h.len() - 2]], points[h[h.len() - 1]], points[i]) <= 0.0
            {
                h.pop();
            }
            h.push(i);
        }
        h.pop();
        h
    };
    let mut lower = build(&mut idx.clone().into_iter());
    let upper = build(&mut idx.into_iter().rev());
    lower.extend(upper);
    lower
}

/// Clip a convex polygon to the half-plane `a·x <= b`.
pub fn clip_halfplane(poly: &[Point], a: Point, b: f64) -> Vec<Point> {
    clip_by(poly, |p| dot(a, p) - b)
}

/// Clip a polygon to `{phi <= 0}` for an affine `phi` given as a closure.
pub fn clip_by(poly: &[Point], phi: impl Fn(Point) -> f64) -> Vec<Point> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 2);
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        let fp = phi(p);
        let fq = phi(q);
        if fp <= 0.0 {
            out.push(p);
        }
        if (fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0) {
            let t = fp / (fp - fq);
            out.push(lerp(p, q, t));
        }
    }
    out
}

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let l2 = dot(ab, ab);
    if l2 == 0.0 {
        return dist(p, a);
    }
    let t = (dot(sub(p, a), ab) / l2).clamp(0.0, 1.0);
    dist(p, lerp(a, b, t))
}

/// Strict separating-axis overlap test for convex polygons. Touching counts as disjoint.
pub fn convex_polygons_overlap(p: &[Point], q: &[Point], tol: f64) -> bool {
    for poly in [p, q] {
        let n = poly.len();
        for i in 0..n {
            let e = sub(poly[(i + 1) % n], poly[i]);
            let axis = [-e[1], e[0]];
            let (mut pmin, mut pmax) = (f64::INFINITY, f64::NEG_INFINITY);
            for &v in p {
                let s = dot(axis, v);
                pmin = pmin.min(s);
                pmax = pmax.max(s);
            }
            let (mut qmin, mut qmax) = (f64::INFINITY, f64::NEG_INFINITY);
            for &v in q {
                let s = dot(axis, v);
                qmin = qmin.min(s);
                qmax = qmax.max(s);
            }
            let scale = norm(axis).max(1e-300);
            if pmax <= qmin + tol * scale || qmax <= pmin + tol * scale {
                return false;
            }
        }
    }
    true
}

pub fn diameter(points: &[Point]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            d = d.max(dist(points[i], points[j]));
        }
    }
    d
}

/// Convex polygon with its half-plane description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DomainRepr", into = "DomainRepr")]
pub struct ConvexDomain {
    vertices: Vec<Point>,
    half_planes: Vec<(Point, f64)>,
}

#[derive(Serialize, Deserialize)]
struct DomainRepr {
    vertices: Vec<Point>,
}

impl TryFrom<DomainRepr> for ConvexDomain {
    type Error = Error;
    fn try_from(r: DomainRepr) -> Result<Self> {
        ConvexDomain::new(r.vertices, 1e-12)
    }
}

impl From<ConvexDomain> for DomainRepr {
    fn from(d: ConvexDomain) -> Self {
        DomainRepr { vertices: d.vertices }
    }
}

impl ConvexDomain {
    pub fn new(vertices: Vec<Point>, tol: f64) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::Degenerate("polygon needs at least 3 vertices".into()));
        }
        for i in 0..n {
            for j in i + 1..n {
                if vertices[i] == vertices[j] {
                    return Err(Error::Degenerate("repeated polygon vertex".into()));
                }
            }
        }
        let area = polygon_area(&vertices);
        if area <= 0.0 {
            return Err(Error::Degenerate(format!("polygon area {area} is not positive")));
        }
        let sc = diameter(&vertices).powi(2);
        for i in 0..n {
            let e0 = sub(vertices[(i + 1) % n], vertices[i]);
            let e1 = sub(vertices[(i + 2) % n], vertices[(i + 1) % n]);
            if cross(e0, e1) < -tol * sc {
                return Err(Error::NotConvex(format!("turn at vertex {}", (i + 1) % n)));
            }
        }
        let half_planes = (0..n)
            .map(|i| {
                let a = vertices[i];
                let b = vertices[(i + 1) % n];
                let e = sub(b, a);
                let l = norm(e);
                let nrm = [e[1] / l, -e[0] / l];
                (nrm, dot(nrm, a))
            })
            .collect();
        Ok(ConvexDomain { vertices, half_planes })
    }

    pub fn square(half: f64) -> Self {
        Self::new(vec![[-half, -half], [half, -half], [half, half], [-half, half]], 1e-12).unwrap()
    }

    pub fn rectangle(lo: Point, hi: Point) -> Self {
        Self::new(vec![lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]], 1e-12).unwrap()
    }

    /// Regular polygon inscribed in the circle of radius `r`.
    pub fn regular(n: usize, r: f64) -> Self {
        let v = (0..n)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                [r * a.cos(), r * a.sin()]
            })
            .collect();
        Self::new(v, 1e-12).unwrap()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Outward unit normals and offsets: the domain is `{x : n·x <= b}`.
    pub fn half_planes(&self) -> &[(Point, f64)] {
        &self.half_planes
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.vertices)
    }

    pub fn diameter(&self) -> f64 {
        diameter(&self.vertices)
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        self.half_planes.iter().all(|&(n, b)| dot(n, p) <= b + tol)
    }

    /// Distance to the boundary for an interior point (negative outside).
    pub fn boundary_distance(&self, p: Point) -> f64 {
        self.half_planes
            .iter()
            .map(|&(n, b)| b - dot(n, p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Minimal interior angle turn; zero for straight corners.
    pub fn is_strictly_convex(&self, tol: f64) -> bool {
        let n = self.vertices.len();
        let sc = self.diameter().powi(2);
        (0..n).all(|i| {
            let e0 = sub(self.vertices[(i + 1) % n], self.vertices[i]);
            let e1 = sub(self.vertices[(i + 2) % n], self.vertices[(i + 1) % n]);
            cross(e0, e1) > tol * sc
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sliver_centroid_stays_inside() {
        let poly = [[0.386, -1.357], [0.386 + 1e-15, -0.97], [0.386, -0.574]];
        let c = polygon_centroid(&poly);
        assert!((c[0] - 0.386).abs() < 1e-12 && c[1] < -0.574 && c[1] > -1.357, "{c:?}");
    }

    #[test]
    fn hull_drops_collinear_and_interior() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [2.0, 2.0], [1.0, 1.0], [0.0, 2.0]];
        let h = convex_hull(&pts);
        assert_eq!(h.len(), 4);
        assert!((polygon_area(&h) - 4.0).abs() < 1e-15);
        let hi = convex_hull_indices(&pts);
        assert_eq!(hi, vec![0, 2, 3, 5]);
    }

    #[test]
    fn clipping_square() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let c = clip_halfplane(&sq, [1.0, 1.0], 1.0);
        assert!((polygon_area(&c) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn domain_rejects_reflex() {
        let v = vec![[0.0, 0.0], [2.0, 0.0], [1.0, 0.2], [2.0, 2.0], [0.0, 2.0]];
        assert!(ConvexDomain::new(v, 1e-12).is_err());
        let d = ConvexDomain::square(1.0);
        assert!((d.boundary_distance([0.5, 0.0]) - 0.5).abs() < 1e-15);
        assert!(!d.is_strictly_convex(1e-12) || d.vertices().len() == 4);
    }

    #[test]
    fn overlap_test() {
        let a = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let b = [[1.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0]];
        let c = [[0.5, 0.5], [1.5, 0.5], [1.5, 1.5], [0.5, 1.5]];
        assert!(!convex_polygons_overlap(&a, &b, 0.0));
        assert!(convex_polygons_overlap(&a, &c, 0.0));
    }
}
