//! Sections `S_u(x, p, h) = {y : u(y) < u(x) + p·(y − x) + h}` and the geometric probes built on them.

use std::collections::VecDeque;

use rand::Rng;
use serde::Serialize;

use crate::convex::PlConvexFunction;
use crate::error::{Error, Result};
use crate::geom::{self, Point};
use crate::grid::{GridFunction, NodeKind};

#[derive(Debug, Clone, Serialize)]
pub struct Section {
    pub center: Point,
    pub center_node: usize,
    pub center_value: f64,
    pub slope: Point,
    pub height: f64,
    pub realized: Vec<usize>,
    /// Counterclockwise convex polygon.
    pub boundary: Vec<Point>,
    pub volume: f64,
    pub clipped: bool,
}

impl Section {
    fn support(&self, y: Point) -> f64 {
        self.center_value + geom::dot(self.slope, geom::sub(y, self.center))
    }
}

/// A convex function sampled at nodes, able to produce its sections.
pub trait SectionSource {
    fn node_count(&self) -> usize;
    fn node_point(&self, k: usize) -> Point;
    fn node_value(&self, k: usize) -> f64;
    /// Whether `k` can serve as a section center.
    fn is_center(&self, k: usize) -> bool;
    fn node_slope(&self, k: usize) -> Result<Point>;
    fn eval(&self, p: Point) -> Option<f64>;
    fn section_with_slope(&self, center: usize, slope: Point, height: f64) -> Result<Section>;

    fn section(&self, center: usize, height: f64) -> Result<Section> {
        let p = self.node_slope(center)?;
        self.section_with_slope(center, p, height)
    }

    fn nearest_node(&self, p: Point) -> usize {
        (0..self.node_count())
            .filter(|&k| self.is_center(k))
            .min_by(|&a, &b| geom::dist(self.node_point(a), p).total_cmp(&geom::dist(self.node_point(b), p)))
            .expect("at least one center node")
    }
}

fn check_height(h: f64) -> Result<()> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("section height {h} must be positive")));
    }
    Ok(())
}

impl SectionSource for GridFunction {
    fn node_count(&self) -> usize {
        self.len()
    }

    fn node_point(&self, k: usize) -> Point {
        self.point(k)
    }

    fn node_value(&self, k: usize) -> f64 {
        self.values[k]
    }

    fn is_center(&self, k: usize) -> bool {
        self.mask[k] == NodeKind::Interior
    }

    /// Centered differences.
    fn node_slope(&self, k: usize) -> Result<Point> {
        if self.mask[k] != NodeKind::Interior {
            return Err(Error::InvalidArgument(format!("node {k} is not interior")));
        }
        Ok([(self.at(k, 1, 0) - self.at(k, -1, 0)) / (2.0 * self.h), (self.at(k, 0, 1) - self.at(k, 0, -1)) / (2.0 * self.h)])
    }

    /// Bilinear interpolation on the cell containing `p`.
    fn eval(&self, p: Point) -> Option<f64> {
        let fx = (p[0] - self.origin[0]) / self.h;
        let fy = (p[1] - self.origin[1]) / self.h;
        let i = (fx.floor() as isize).clamp(0, self.dims[0] as isize - 2);
        let j = (fy.floor() as isize).clamp(0, self.dims[1] as isize - 2);
        let (s, t) = (fx - i as f64, fy - j as f64);
        if !(-1e-9..=1.0 + 1e-9).contains(&s) || !(-1e-9..=1.0 + 1e-9).contains(&t) {
            return None;
        }
        let mut acc = 0.0;
        for (di, dj, w) in [(0, 0, (1.0 - s) * (1.0 - t)), (1, 0, s * (1.0 - t)), (0, 1, (1.0 - s) * t), (1, 1, s * t)] {
            let k = self.index(i + di, j + dj)?;
            if self.mask[k] == NodeKind::Exterior {
                if w.abs() > 1e-12 {
                    return None;
                }
                continue;
            }
            acc += w * self.values[k];
        }
        Some(acc)
    }

    /// Realized set by breadth-first search over axis neighbors; the boundary polygon is the hull
    /// of the linearly interpolated crossings on grid edges (sublevel sets of convex data are convex).
    fn section_with_slope(&self, center: usize, slope: Point, height: f64) -> Result<Section> {
        check_height(height)?;
        if self.mask[center] == NodeKind::Exterior {
            return Err(Error::InvalidArgument("section center outside the grid domain".into()));
        }
        let x0 = self.point(center);
        let u0 = self.values[center];
        let w = |k: usize| self.values[k] - u0 - geom::dot(slope, geom::sub(self.point(k), x0)) - height;
        let mut seen = vec![false; self.len()];
        let mut realized = Vec::new();
        let mut queue = VecDeque::from([center]);
        seen[center] = true;
        let mut pts = Vec::new();
        let mut clipped = false;
        while let Some(k) = queue.pop_front() {
            realized.push(k);
            let wk = w(k);
            if self.mask[k] == NodeKind::Boundary {
                clipped = true;
                pts.push(self.point(k));
            }
            let (i, j) = self.ij(k);
            for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                let Some(m) = self.index(i as isize + di, j as isize + dj) else { continue };
                if self.mask[m] == NodeKind::Exterior {
                    continue;
                }
                let wm = w(m);
                if wm < 0.0 {
                    if !seen[m] {
                        seen[m] = true;
                        queue.push_back(m);
                    }
                } else {
                    pts.push(geom::lerp(self.point(k), self.point(m), wk / (wk - wm)));
                }
            }
        }
        realized.sort_unstable();
        let boundary = geom::convex_hull(&pts);
        let volume = geom::polygon_area(&boundary);
        Ok(Section { center: x0, center_node: center, center_value: u0, slope, height, realized, boundary, volume, clipped })
    }
}

impl SectionSource for PlConvexFunction {
    fn node_count(&self) -> usize {
        self.mesh().vertices().len()
    }

    fn node_point(&self, k: usize) -> Point {
        self.mesh().vertices()[k]
    }

    fn node_value(&self, k: usize) -> f64 {
        self.values()[k]
    }

    fn is_center(&self, k: usize) -> bool {
        !self.mesh().is_boundary(k)
    }

    /// Centroid of the subdifferential.
    fn node_slope(&self, k: usize) -> Result<Point> {
        self.slope(k)
    }

    fn eval(&self, p: Point) -> Option<f64> {
        self.as_pl().eval(p)
    }

    /// Exact: each triangle is clipped by the plane `u = ℓ + h`.
    fn section_with_slope(&self, center: usize, slope: Point, height: f64) -> Result<Section> {
        check_height(height)?;
        let mesh = self.mesh();
        let verts = mesh.vertices();
        let x0 = verts[center];
        let u0 = self.values()[center];
        let w = |k: usize| self.values()[k] - u0 - geom::dot(slope, geom::sub(verts[k], x0)) - height;
        let mut seen = vec![false; verts.len()];
        let mut realized = Vec::new();
        let mut queue = VecDeque::from([center]);
        seen[center] = true;
        while let Some(k) = queue.pop_front() {
            realized.push(k);
            for m in mesh.neighbors(k) {
                if !seen[m] && w(m) < 0.0 {
                    seen[m] = true;
                    queue.push_back(m);
                }
            }
        }
        realized.sort_unstable();
        let clipped = realized.iter().any(|&k| mesh.is_boundary(k));
        let mut pts = Vec::new();
        let mut volume = 0.0;
        for (t, &[a, b, c]) in mesh.triangles().iter().enumerate() {
            if w(a) >= 0.0 && w(b) >= 0.0 && w(c) >= 0.0 {
                continue;
            }
            let g = geom::sub(self.gradients()[t], slope);
            let wa = w(a);
            let piece = geom::clip_by(&[verts[a], verts[b], verts[c]], |p| wa + geom::dot(g, geom::sub(p, verts[a])));
            volume += geom::polygon_area(&piece);
            pts.extend(piece);
        }
        let boundary = geom::convex_hull(&pts);
        Ok(Section { center: x0, center_node: center, center_value: u0, slope, height, realized, boundary, volume, clipped })
    }
}

/// Largest `u − ℓ` over the realized nodes and boundary vertices of `inner`, where `ℓ` is the
/// supporting function of `outer`.
pub fn max_excess(src: &impl SectionSource, inner: &Section, outer: &Section) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for &k in &inner.realized {
        let y = src.node_point(k);
        m = m.max(src.node_value(k) - outer.support(y));
    }
    for &b in &inner.boundary {
        // boundary vertices of `inner` lie on its level set
        let ub = src.eval(b).unwrap_or(inner.support(b) + inner.height);
        m = m.max(ub - outer.support(b));
    }
    m
}

fn inside_convex(poly: &[Point], p: Point) -> bool {
    let n = poly.len();
    n >= 3 && (0..n).all(|i| geom::cross(geom::sub(poly[(i + 1) % n], poly[i]), geom::sub(p, poly[i])) >= 0.0)
}

/// Distance from an interior point `c` to the boundary of a convex counterclockwise polygon along `d`.
fn radial(poly: &[Point], c: Point, d: Point) -> f64 {
    let n = poly.len();
    let mut t = f64::INFINITY;
    for i in 0..n {
        let a = poly[i];
        let e = geom::sub(poly[(i + 1) % n], a);
        let nrm = [e[1], -e[0]];
        let nd = geom::dot(nrm, d);
        if nd > 0.0 {
            t = t.min(geom::dot(nrm, geom::sub(a, c)) / nd);
        }
    }
    t
}

fn least_squares_slope(xy: &[(f64, f64)]) -> f64 {
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Serialize)]
pub struct VolumeRow {
    pub h: f64,
    pub volume: f64,
    /// `|S| / h^{n/2}`
    pub ratio: f64,
    pub clipped: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VolumeSweep {
    pub rows: Vec<VolumeRow>,
    /// max/min of the ratio over unclipped rows.
    pub spread: f64,
    pub pass: bool,
}

pub fn section_volume_sweep(src: &impl SectionSource, center: usize, heights: &[f64], ratio_bound: f64) -> Result<VolumeSweep> {
    let mut rows = Vec::with_capacity(heights.len());
    for &h in heights {
        let s = src.section(center, h)?;
        rows.push(VolumeRow { h, volume: s.volume, ratio: s.volume / h, clipped: s.clipped });
    }
    let kept: Vec<f64> = rows.iter().filter(|r| !r.clipped).map(|r| r.ratio).collect();
    let spread = if kept.is_empty() {
        f64::NAN
    } else {
        kept.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / kept.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    Ok(VolumeSweep { pass: !kept.is_empty() && spread <= ratio_bound, rows, spread })
}

#[derive(Debug, Clone, Serialize)]
pub struct EngulfingReport {
    pub theta: f64,
    /// `(y, x, h, θ)` for the pair needing the largest θ.
    pub worst: (usize, usize, f64, f64),
    pub pairs: usize,
    pub skipped: usize,
}

/// Smallest `θ` with `S(y, h) ⊂ S(x, θh)` over the samples `(y, h)` and up to `per_section`
/// points `x ∈ S(y, h)` each. Samples with `S(y, 2h)` clipped are skipped.
pub fn engulfing_constant(src: &impl SectionSource, samples: &[(usize, f64)], per_section: usize) -> Result<EngulfingReport> {
    let mut best = (0, 0, 0.0, f64::NEG_INFINITY);
    let mut pairs = 0;
    let mut skipped = 0;
    for &(y, h) in samples {
        if src.section(y, 2.0 * h)?.clipped {
            skipped += 1;
            continue;
        }
        let sy = src.section(y, h)?;
        let centers: Vec<usize> = sy.realized.iter().copied().filter(|&k| src.is_center(k)).collect();
        let stride = (centers.len() / per_section.max(1)).max(1);
        for &x in centers.iter().step_by(stride) {
            let sx = src.section(x, h)?;
            let theta = max_excess(src, &sy, &sx) / h;
            pairs += 1;
            if theta > best.3 {
                best = (y, x, h, theta);
            }
        }
    }
    if pairs == 0 {
        return Err(Error::Precondition("no admissible engulfing samples".into()));
    }
    Ok(EngulfingReport { theta: best.3, worst: best, pairs, skipped })
}

#[derive(Debug, Clone, Serialize)]
pub struct InclusionReport {
    /// Largest `c` with `S(x₁, c(s−r)^{p₁}t) ⊂ S(x₀, st)` uniformly over `x₁ ∈ S(x₀, rt)`.
    pub inclusion_c: f64,
    pub inclusion_samples: usize,
    /// Largest `c` with `S(x₁, c(s−r)^{p₁}t) ∩ S(x₀, rt) = ∅` uniformly over `x₁ ∉ S(x₀, st)`.
    pub exclusion_c: Option<f64>,
    pub exclusion_samples: usize,
}

fn largest_c(ok: impl Fn(f64) -> Result<bool>) -> Result<f64> {
    let mut lo = 0.0;
    let mut hi = 1.0;
    while ok(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Ok(lo);
        }
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

pub fn inclusion_exclusion_probe(src: &impl SectionSource, center: usize, t: f64, r: f64, s: f64, p1: f64, max_samples: usize) -> Result<InclusionReport> {
    if !(0.0 < r && r < s && s <= 1.0) {
        return Err(Error::InvalidArgument(format!("need 0 < r < s ≤ 1, got r={r}, s={s}")));
    }
    let big = src.section(center, 2.0 * t)?;
    if big.clipped {
        return Err(Error::Clipped);
    }
    let outer = src.section(center, s * t)?;
    let inner = src.section(center, r * t)?;
    let scale = (s - r).powf(p1) * t;
    let pick = |v: Vec<usize>| -> Vec<usize> {
        let stride = (v.len() / max_samples.max(1)).max(1);
        v.into_iter().step_by(stride).collect()
    };
    let inside = pick(inner.realized.iter().copied().filter(|&k| src.is_center(k)).collect());
    let mut inclusion_c = f64::INFINITY;
    for &x1 in &inside {
        let c = largest_c(|c| {
            if c == 0.0 {
                return Ok(true);
            }
            Ok(max_excess(src, &src.section(x1, c * scale)?, &outer) < s * t)
        })?;
        inclusion_c = inclusion_c.min(c);
    }
    let in_outer: Vec<bool> = {
        let mut f = vec![false; src.node_count()];
        outer.realized.iter().for_each(|&k| f[k] = true);
        f
    };
    let outside = pick(big.realized.iter().copied().filter(|&k| src.is_center(k) && !in_outer[k]).collect());
    let mut exclusion_c: Option<f64> = None;
    for &x1 in &outside {
        let c = largest_c(|c| Ok(!geom::convex_polygons_overlap(&src.section(x1, c * scale)?.boundary, &inner.boundary, 0.0)))?;
        exclusion_c = Some(exclusion_c.map_or(c, |e| e.min(c)));
    }
    Ok(InclusionReport { inclusion_c, inclusion_samples: inside.len(), exclusion_c, exclusion_samples: outside.len() })
}

#[derive(Debug, Clone, Serialize)]
pub struct CoveringSelection {
    /// `(center, height)` of the selected sections.
    pub chosen: Vec<(Point, f64)>,
    pub chosen_index: Vec<usize>,
    pub dilation: f64,
    pub disjoint: bool,
    pub samples: usize,
    pub uncovered: usize,
}

impl CoveringSelection {
    pub fn covered(&self) -> bool {
        self.uncovered == 0
    }
}

/// Greedy selection over dyadic height buckets `H/2^i < h ≤ H/2^{i−1}`; within a bucket by
/// decreasing height, then center. Coverage of the family's union by the `2θ₀²`-dilated
/// selection is checked at `samples` random points of the union.
pub fn vitali_select(
    src: &impl SectionSource,
    family: &[(usize, f64)],
    theta0: f64,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<CoveringSelection> {
    let dilation = 2.0 * theta0 * theta0;
    if family.is_empty() {
        return Ok(CoveringSelection { chosen: vec![], chosen_index: vec![], dilation, disjoint: true, samples: 0, uncovered: 0 });
    }
    let sections = family.iter().map(|&(c, h)| src.section(c, h)).collect::<Result<Vec<_>>>()?;
    if sections.iter().any(|s| s.clipped) {
        return Err(Error::Clipped);
    }
    let top = family.iter().map(|f| f.1).fold(0.0, f64::max);
    let bucket = |h: f64| (1..).find(|&i| h > top / 2f64.powi(i)).unwrap();
    let mut order: Vec<usize> = (0..family.len()).collect();
    order.sort_by(|&a, &b| {
        let (sa, sb) = (&sections[a], &sections[b]);
        bucket(sa.height)
            .cmp(&bucket(sb.height))
            .then(sb.height.total_cmp(&sa.height))
            .then(sa.center[0].total_cmp(&sb.center[0]))
            .then(sa.center[1].total_cmp(&sb.center[1]))
    });
    let mut chosen: Vec<usize> = Vec::new();
    for i in order {
        if chosen.iter().all(|&j| !geom::convex_polygons_overlap(&sections[i].boundary, &sections[j].boundary, 0.0)) {
            chosen.push(i);
        }
    }
    let disjoint = chosen.iter().enumerate().all(|(a, &i)| {
        chosen[a + 1..].iter().all(|&j| !geom::convex_polygons_overlap(&sections[i].boundary, &sections[j].boundary, 0.0))
    });
    let all: Vec<Point> = sections.iter().flat_map(|s| s.boundary.iter().copied()).collect();
    let (lo, hi) = all.iter().fold(([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]), |(lo, hi), p| {
        ([lo[0].min(p[0]), lo[1].min(p[1])], [hi[0].max(p[0]), hi[1].max(p[1])])
    });
    let mut uncovered = 0;
    let mut taken = 0;
    let mut attempts = 0;
    while taken < samples && attempts < 1000 * samples {
        attempts += 1;
        let p = [rng.gen_range(lo[0]..=hi[0]), rng.gen_range(lo[1]..=hi[1])];
        if !sections.iter().any(|s| inside_convex(&s.boundary, p)) {
            continue;
        }
        taken += 1;
        let Some(up) = src.eval(p) else { continue };
        let hit = chosen.iter().any(|&j| {
            let s = &sections[j];
            up - s.support(p) < dilation * s.height
        });
        if !hit {
            uncovered += 1;
        }
    }
    Ok(CoveringSelection {
        chosen: chosen.iter().map(|&j| (sections[j].center, sections[j].height)).collect(),
        chosen_index: chosen,
        dilation,
        disjoint,
        samples: taken,
        uncovered,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct C1AlphaVerdict {
    /// Largest `δ` with `(1/2 + δ)S(x,1) ⊂ S(x,1/2) ⊂ (1 − δ)S(x,1)`, dilations about `x`.
    pub delta: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub clipped: bool,
    pub pass: bool,
}

/// Compares radial functions of the two sections about the center. Clipped sections are flagged
/// and fail; a flat direction shows up as `δ = 0`.
pub fn c1alpha_inclusion_probe(src: &impl SectionSource, center: usize) -> Result<C1AlphaVerdict> {
    let s1 = src.section(center, 1.0)?;
    let sh = src.section(center, 0.5)?;
    let c = s1.center;
    let mut dirs: Vec<f64> = (0..1440).map(|k| 2.0 * std::f64::consts::PI * k as f64 / 1440.0).collect();
    for p in s1.boundary.iter().chain(&sh.boundary) {
        let d = geom::sub(*p, c);
        dirs.push(d[1].atan2(d[0]));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for a in dirs {
        let d = [a.cos(), a.sin()];
        let q = radial(&sh.boundary, c, d) / radial(&s1.boundary, c, d);
        lo = lo.min(q);
        hi = hi.max(q);
    }
    let delta = (lo - 0.5).min(1.0 - hi).max(0.0);
    let clipped = s1.clipped || sh.clipped;
    Ok(C1AlphaVerdict { delta, min_ratio: lo, max_ratio: hi, clipped, pass: !clipped && delta > 0.0 })
}

#[derive(Debug, Clone, Serialize)]
pub struct ThetaReport {
    pub theta: f64,
    pub pass: bool,
}

/// Smallest `θ` with `w(x₀ + θ(x − x₀)) ≥ w(x)/2` at the boundary vertices `x` of `S(x₀, h)`,
/// `w = u − ℓ`.
pub fn theta_probe(src: &impl SectionSource, center: usize, h: f64) -> Result<ThetaReport> {
    let s = src.section(center, h)?;
    let c = s.center;
    let w = |p: Point| src.eval(p).map(|u| u - s.support(p));
    let mut theta: f64 = 0.0;
    for &b in &s.boundary {
        let Some(wb) = w(b) else { continue };
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            match w(geom::lerp(c, b, mid)) {
                Some(v) if v >= 0.5 * wb => hi = mid,
                _ => lo = mid,
            }
        }
        theta = theta.max(hi);
    }
    Ok(ThetaReport { theta, pass: theta < 1.0 })
}

#[derive(Debug, Clone, Serialize)]
pub struct SecSizeReport {
    /// `(h, diameter)`
    pub rows: Vec<(f64, f64)>,
    pub mu: f64,
    pub pass: bool,
}

/// Fits `diam S(z, h) ~ h^μ`.
pub fn sec_size_probe(src: &impl SectionSource, center: usize, heights: &[f64]) -> Result<SecSizeReport> {
    let mut rows = Vec::new();
    for &h in heights {
        rows.push((h, geom::diameter(&src.section(center, h)?.boundary)));
    }
    if rows.len() < 2 {
        return Err(Error::InvalidArgument("need at least two heights".into()));
    }
    let logs: Vec<(f64, f64)> = rows.iter().map(|&(h, d)| (h.ln(), d.ln())).collect();
    let mu = least_squares_slope(&logs);
    Ok(SecSizeReport { rows, mu, pass: mu > 0.0 && mu <= 1.0 + 1e-9 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn quadratic_grid(n: usize, half: f64) -> GridFunction {
        GridFunction::square(n, -half, half, |x| geom::dot(x, x) / 2.0).unwrap()
    }

    fn center(g: &GridFunction, p: Point) -> usize {
        g.nearest_node(p)
    }

    #[test]
    fn quadratic_sections_are_disks() {
        let g = quadratic_grid(300, 1.5);
        for (p, h) in [([0.0, 0.0], 0.5), ([0.3, -0.2], 0.1), ([0.0, 0.0], 0.005)] {
            let s = g.section(center(&g, p), h).unwrap();
            assert!(!s.clipped);
            assert!((s.volume / (2.0 * PI * h) - 1.0).abs() < 0.01, "{} {}", s.volume, 2.0 * PI * h);
        }
    }

    #[test]
    fn affine_function_section_is_clipped_domain() {
        let g = GridFunction::square(20, -1.0, 1.0, |x| 2.0 * x[0] - x[1]).unwrap();
        let s = g.section(center(&g, [0.0, 0.0]), 0.1).unwrap();
        assert!(s.clipped && s.realized.len() == g.len());
        assert!((s.volume - 4.0).abs() < 1e-12);
    }

    #[test]
    fn eccentric_sections_have_the_same_area() {
        for eps in [1.0, 0.25] {
            let g = GridFunction::square(400, -2.0, 2.0, |x| x[0] * x[0] / (2.0 * eps) + eps * x[1] * x[1] / 2.0).unwrap();
            let t = 0.2;
            let s = g.section(center(&g, [0.0, 0.0]), t).unwrap();
            assert!((s.volume / (2.0 * PI * t) - 1.0).abs() < 0.01, "eps {eps}: {}", s.volume);
            let a = (2.0 * eps * t).sqrt();
            let b = (2.0 * t / eps).sqrt();
            let xs = s.boundary.iter().map(|p| p[0].abs()).fold(0.0, f64::max);
            let ys = s.boundary.iter().map(|p| p[1].abs()).fold(0.0, f64::max);
            assert!((xs - a).abs() < 0.02 && (ys - b).abs() < 0.02);
        }
    }

    #[test]
    fn pl_sections_match_brute_force_area() {
        let mesh = Mesh::square_grid(24, -1.0, 1.0).unwrap();
        let vals = mesh.vertices().iter().map(|p| geom::dot(*p, *p) / 2.0 + 0.3 * p[0]).collect();
        let u = PlConvexFunction::new(mesh, vals, 1e-10).unwrap();
        let c = u.nearest_node([0.1, 0.1]);
        let s = u.section(c, 0.2).unwrap();
        assert!(!s.clipped);
        // cell counting on a fine lattice
        let n = 800;
        let mut inside = 0;
        for i in 0..n {
            for j in 0..n {
                let p = [-1.0 + (i as f64 + 0.5) * 2.0 / n as f64, -1.0 + (j as f64 + 0.5) * 2.0 / n as f64];
                if u.eval(p).unwrap() < s.support(p) + 0.2 {
                    inside += 1;
                }
            }
        }
        let brute = inside as f64 * 4.0 / (n * n) as f64;
        assert!((s.volume - brute).abs() < 5e-3, "{} {brute}", s.volume);
        assert!((geom::polygon_area(&s.boundary) - s.volume).abs() < 1e-12);
    }

    #[test]
    fn volume_sweep_on_quadratic() {
        let g = quadratic_grid(400, 1.5);
        let heights: Vec<f64> = (0..=8).map(|k| 0.005 * 10f64.powf(k as f64 / 4.0)).collect();
        let sweep = section_volume_sweep(&g, center(&g, [0.0, 0.0]), &heights, 1.02).unwrap();
        assert!(sweep.pass, "{}", sweep.spread);
        assert!(sweep.rows.iter().all(|r| (r.ratio / (2.0 * PI) - 1.0).abs() < 0.01));
    }

    #[test]
    fn engulfing_on_quadratic_and_tilted() {
        let g = quadratic_grid(120, 2.0);
        let tilted = g.with_values(|x| geom::dot(x, x) / 2.0 + 0.7 * x[0] - 0.2 * x[1] + 3.0);
        let samples: Vec<(usize, f64)> = [([0.0, 0.0], 0.3), ([0.2, 0.1], 0.2), ([-0.3, 0.3], 0.1)]
            .iter()
            .map(|&(p, h)| (center(&g, p), h))
            .collect();
        let a = engulfing_constant(&g, &samples, 40).unwrap();
        let b = engulfing_constant(&tilted, &samples, 40).unwrap();
        assert!(a.theta <= 4.1 && a.pairs >= 100, "{a:?}");
        assert!((a.theta - b.theta).abs() < 1e-9);
        let ecc = GridFunction::square(200, -2.0, 2.0, |x| x[0] * x[0] / 0.02 + 0.01 * x[1] * x[1] / 2.0).unwrap();
        let e = engulfing_constant(&ecc, &[(center(&ecc, [0.0, 0.0]), 0.002)], 60).unwrap();
        assert!(e.theta <= 4.1, "{e:?}");
    }

    #[test]
    fn inclusion_exclusion_on_quadratic() {
        let g = quadratic_grid(160, 2.0);
        let (r, s) = (0.25, 0.5);
        let rep = inclusion_exclusion_probe(&g, center(&g, [0.0, 0.0]), 0.5, r, s, 1.0, 30).unwrap();
        let c0 = (s.sqrt() - r.sqrt()) / (s.sqrt() + r.sqrt());
        assert!(rep.inclusion_c >= c0 * 0.98, "{rep:?}");
        assert!(rep.exclusion_c.unwrap() >= c0 * 0.98, "{rep:?}");
        assert!(inclusion_exclusion_probe(&g, 0, 0.5, 0.5, 0.25, 1.0, 3).is_err());
    }

    #[test]
    fn vitali_selection() {
        let g = quadratic_grid(100, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = center(&g, [0.0, 0.0]);
        let one = vitali_select(&g, &[(c, 0.1)], 1.0 / 2f64.sqrt(), 500, &mut rng).unwrap();
        assert_eq!(one.chosen.len(), 1);
        assert!(one.covered());
        let two = vitali_select(&g, &[(c, 0.1), (c, 0.1)], 1.0 / 2f64.sqrt(), 500, &mut rng).unwrap();
        assert_eq!(two.chosen.len(), 1);
        assert!(two.covered());
        let family: Vec<(usize, f64)> = (0..100)
            .map(|_| (center(&g, [rng.gen_range(-0.8..0.8), rng.gen_range(-0.8..0.8)]), rng.gen_range(0.005..0.08)))
            .collect();
        let sel = vitali_select(&g, &family, 4.0, 10_000, &mut rng).unwrap();
        assert!(sel.disjoint && sel.covered() && sel.samples == 10_000);
    }

    #[test]
    fn c1alpha_and_theta_on_quadratic() {
        let g = quadratic_grid(200, 2.0);
        let c = center(&g, [0.0, 0.0]);
        let v = c1alpha_inclusion_probe(&g, c).unwrap();
        assert!(v.pass);
        assert!((v.delta - (0.5f64.sqrt() - 0.5)).abs() < 0.01, "{v:?}");
        let t = theta_probe(&g, c, 0.5).unwrap();
        assert!(t.pass && (t.theta - 0.5f64.sqrt()).abs() < 0.01, "{t:?}");
        let size = sec_size_probe(&g, c, &[0.01, 0.04, 0.16, 0.64]).unwrap();
        assert!(size.pass && (size.mu - 0.5).abs() < 0.02);
    }

    #[test]
    fn flat_direction_gives_zero_delta() {
        let g = GridFunction::square(40, -1.0, 1.0, |x| 2.0 * x[0].abs()).unwrap();
        let v = c1alpha_inclusion_probe(&g, center(&g, [0.0, 0.0])).unwrap();
        assert!(v.clipped && !v.pass && v.delta == 0.0, "{v:?}");
    }

    #[test]
    fn sections_are_affine_covariant() {
        let uf = |x: Point| (x[0] + 0.5 * x[1]).exp() + x[0] * x[0] + x[1] * x[1];
        let t = |x: Point| [x[0] + x[1], x[1]];
        let h = 0.02;
        let u = GridFunction::square(150, -1.5, 1.5, uf).unwrap();
        let v = GridFunction::square(150, -1.5, 1.5, |x| uf(t(x)) + 0.3 * x[0] - x[1]).unwrap();
        let xi0 = center(&v, [0.1, -0.2]);
        let su = u.section(center(&u, t(v.point(xi0))), 0.3).unwrap();
        let sv = v.section(xi0, 0.3).unwrap();
        let in_u: std::collections::HashSet<usize> = su.realized.iter().copied().collect();
        for &k in &sv.realized {
            let y = t(v.point(k));
            let m = u.nearest_node(y);
            let near = in_u.contains(&m)
                || crate::grid::NEIGHBORS8.iter().any(|&(di, dj)| {
                    let (i, j) = u.ij(m);
                    u.index(i as isize + di, j as isize + dj).is_some_and(|q| in_u.contains(&q))
                });
            assert!(near && geom::dist(u.point(m), y) < h);
        }
        assert!((su.volume - sv.volume).abs() < 0.02 * su.volume);
    }
}
