//! Lower convex envelope of lifted planar points as a regular triangulation.
//!
//! Hull corners are fan-triangulated and flipped to local convexity, hull-edge
//! points go in through their one-dimensional lower hulls, and interior points are
//! inserted by cavity retriangulation driven by exact `orient3d` signs.

use crate::error::{Error, Result};
use crate::geom::{self, orient2d, orient3d, Point};

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexState {
    Pending,
    Active,
    /// Strictly above the envelope when it was offered.
    Redundant,
    /// Was on the envelope, later lifted off by a lower point.
    Hidden,
    /// Inserted by a planar split with an interpolated height.
    Passive,
}

#[derive(Debug, Clone)]
struct Tri {
    v: [usize; 3],
    nb: [usize; 3],
    /// Active vertices spanning the facet plane; passive splits inherit it.
    plane: [usize; 3],
    alive: bool,
}

#[derive(Debug, Clone, Copy)]
enum Loc {
    Inside(usize),
    OnEdge(usize, usize),
    OnVertex(usize),
}

#[derive(Debug, Clone)]
pub struct Envelope {
    points: Vec<Point>,
    heights: Vec<f64>,
    state: Vec<VertexState>,
    tris: Vec<Tri>,
    free: Vec<usize>,
    last: usize,
    stamp: Vec<u32>,
    epoch: u32,
    rng: u64,
}

impl Envelope {
    /// Regular triangulation of all points; points above the envelope are left out.
    pub fn build(points: &[Point], heights: &[f64]) -> Result<Self> {
        if points.len() != heights.len() {
            return Err(Error::InvalidArgument("points and heights differ in length".into()));
        }
        if heights.iter().any(|z| !z.is_finite()) || points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::InvalidArgument("non-finite input".into()));
        }
        let corners = geom::convex_hull_indices(points);
        if corners.len() < 3 {
            return Err(Error::Degenerate("points are collinear".into()));
        }
        let mut env = Envelope {
            points: points.to_vec(),
            heights: heights.to_vec(),
            state: vec![VertexState::Pending; points.len()],
            tris: Vec::with_capacity(2 * points.len()),
            free: Vec::new(),
            last: 0,
            stamp: Vec::new(),
            epoch: 0,
            rng: 0x9E37_79B9_7F4A_7C15,
        };
        env.check_duplicates()?;
        env.triangulate_corners(&corners);

        let m = corners.len();
        let mut on_edge: Vec<Vec<usize>> = vec![Vec::new(); m];
        let mut interior = Vec::new();
        let is_corner = {
            let mut f = vec![false; points.len()];
            for &c in &corners {
                f[c] = true;
            }
            f
        };
        for i in 0..points.len() {
            if is_corner[i] {
                continue;
            }
            let p = points[i];
            let mut edge = None;
            for e in 0..m {
                let a = points[corners[e]];
                let b = points[corners[(e + 1) % m]];
                if orient2d(a, b, p) == 0.0 {
                    edge = Some(e);
                    break;
                }
            }
            match edge {
                Some(e) => on_edge[e].push(i),
                None => interior.push(i),
            }
        }
        for e in 0..m {
            if on_edge[e].is_empty() {
                continue;
            }
            let a = corners[e];
            let b = corners[(e + 1) % m];
            for i in env.edge_lower_hull(a, b, &on_edge[e]) {
                env.insert(i, false)?;
            }
        }
        for i in interior {
            env.insert(i, false)?;
        }
        Ok(env)
    }

    fn check_duplicates(&self) -> Result<()> {
        let mut idx: Vec<usize> = (0..self.points.len()).collect();
        idx.sort_by(|&a, &b| {
            self.points[a][0]
                .total_cmp(&self.points[b][0])
                .then(self.points[a][1].total_cmp(&self.points[b][1]))
        });
        for w in idx.windows(2) {
            if self.points[w[0]] == self.points[w[1]] {
                return Err(Error::Degenerate(format!("duplicate points {} and {}", w[0], w[1])));
            }
        }
        Ok(())
    }

    fn lift(&self, i: usize) -> [f64; 3] {
        let p = self.points[i];
        [p[0], p[1], self.heights[i]]
    }

    fn below(&self, t: usize, p: [f64; 3]) -> f64 {
        let v = self.tris[t].v;
        orient3d(self.lift(v[0]), self.lift(v[1]), self.lift(v[2]), p)
    }

    fn new_tri(&mut self, v: [usize; 3], nb: [usize; 3]) -> usize {
        let t = Tri { v, nb, plane: v, alive: true };
        if let Some(s) = self.free.pop() {
            self.tris[s] = t;
            s
        } else {
            self.tris.push(t);
            self.stamp.push(0);
            self.tris.len() - 1
        }
    }

    fn triangulate_corners(&mut self, c: &[usize]) {
        let m = c.len();
        for k in 1..m - 1 {
            let prev = if k > 1 { k - 2 } else { NONE };
            let next = if k + 1 < m - 1 { k } else { NONE };
            self.new_tri([c[0], c[k], c[k + 1]], [NONE, next, prev]);
        }
        for &i in c {
            self.state[i] = VertexState::Active;
        }
        let mut stack: Vec<(usize, usize)> = Vec::new();
        for t in 0..self.tris.len() {
            for k in 0..3 {
                if self.tris[t].nb[k] != NONE {
                    stack.push((t, k));
                }
            }
        }
        while let Some((t, k)) = stack.pop() {
            let u = self.tris[t].nb[k];
            if u == NONE {
                continue;
            }
            let j = match (0..3).find(|&j| self.tris[u].nb[j] == t) {
                Some(j) => j,
                None => continue,
            };
            let d = self.tris[u].v[j];
            if self.below(t, self.lift(d)) > 0.0 {
                let out = self.flip(t, k, u, j);
                stack.extend(out);
            }
        }
        self.last = 0;
    }

    /// Flip the edge opposite `t.v[k]`, shared with `u` (where it is opposite `u.v[j]`).
    fn flip(&mut self, t: usize, k: usize, u: usize, j: usize) -> [(usize, usize); 4] {
        let tv = self.tris[t].v;
        let tn = self.tris[t].nb;
        let uv = self.tris[u].v;
        let un = self.tris[u].nb;
        let a = tv[k];
        let b = tv[(k + 1) % 3];
        let c = tv[(k + 2) % 3];
        let d = uv[j];
        debug_assert_eq!(uv[(j + 1) % 3], c);
        let n_ca = tn[(k + 1) % 3];
        let n_ab = tn[(k + 2) % 3];
        let n_bd = un[(j + 1) % 3];
        let n_dc = un[(j + 2) % 3];
        self.tris[t].v = [a, b, d];
        self.tris[t].nb = [n_bd, u, n_ab];
        self.tris[u].v = [a, d, c];
        self.tris[u].nb = [n_dc, n_ca, t];
        self.tris[t].plane = self.tris[t].v;
        self.tris[u].plane = self.tris[u].v;
        self.repoint(n_bd, u, t);
        self.repoint(n_ca, t, u);
        [(t, 0), (t, 2), (u, 0), (u, 1)]
    }

    fn repoint(&mut self, n: usize, old: usize, new: usize) {
        if n == NONE {
            return;
        }
        for s in self.tris[n].nb.iter_mut() {
            if *s == old {
                *s = new;
                return;
            }
        }
    }

    // freed cavity slots get reused, so the link is found by its edge rather than its old owner
    fn repoint_edge(&mut self, n: usize, a: usize, b: usize, new: usize) {
        if n == NONE {
            return;
        }
        let v = self.tris[n].v;
        if let Some(k) = (0..3).find(|&k| v[k] != a && v[k] != b) {
            self.tris[n].nb[k] = new;
        }
    }

    /// Points strictly between hull corners `a` and `b` that lie on the lower hull of
    /// the lifted segment; the rest are marked redundant.
    fn edge_lower_hull(&mut self, a: usize, b: usize, pts: &[usize]) -> Vec<usize> {
        let pa = self.points[a];
        let pb = self.points[b];
        let axis = if (pb[0] - pa[0]).abs() >= (pb[1] - pa[1]).abs() { 0 } else { 1 };
        let dir = if pb[axis] > pa[axis] { 1.0 } else { -1.0 };
        let mut all: Vec<usize> = pts.to_vec();
        all.push(a);
        all.push(b);
        all.sort_by(|&i, &j| (dir * self.points[i][axis]).total_cmp(&(dir * self.points[j][axis])));
        let key = |s: &Self, i: usize| [dir * s.points[i][axis], s.heights[i]];
        let mut hull: Vec<usize> = Vec::new();
        for &i in &all {
            while hull.len() >= 2 {
                let o = orient2d(key(self, hull[hull.len() - 2]), key(self, hull[hull.len() - 1]), key(self, i));
                if o < 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(i);
        }
        let keep: Vec<usize> = hull.into_iter().filter(|&i| i != a && i != b).collect();
        for &i in pts {
            if !keep.contains(&i) {
                self.state[i] = VertexState::Redundant;
            }
        }
        keep
    }

    fn next_rand(&mut self) -> u64 {
        self.rng ^= self.rng << 13;
        self.rng ^= self.rng >> 7;
        self.rng ^= self.rng << 17;
        self.rng
    }

    fn locate(&mut self, p: Point) -> Result<Loc> {
        let mut t = self.last;
        if t >= self.tris.len() || !self.tris[t].alive {
            t = (0..self.tris.len()).find(|&s| self.tris[s].alive).unwrap_or(0);
        }
        let limit = 4 * self.tris.len() + 16;
        for _ in 0..limit {
            let off = (self.next_rand() % 3) as usize;
            let mut moved = false;
            let mut zeros = [false; 3];
            for r in 0..3 {
                let k = (r + off) % 3;
                let v = self.tris[t].v;
                let o = orient2d(self.points[v[(k + 1) % 3]], self.points[v[(k + 2) % 3]], p);
                if o < 0.0 {
                    let n = self.tris[t].nb[k];
                    if n == NONE {
                        return Err(Error::InvalidArgument(format!("point {p:?} outside the hull")));
                    }
                    t = n;
                    moved = true;
                    break;
                }
                zeros[k] = o == 0.0;
            }
            if !moved {
                return Ok(self.classify(t, zeros));
            }
        }
        for t in 0..self.tris.len() {
            if !self.tris[t].alive {
                continue;
            }
            let v = self.tris[t].v;
            let mut zeros = [false; 3];
            let mut inside = true;
            for k in 0..3 {
                let o = orient2d(self.points[v[(k + 1) % 3]], self.points[v[(k + 2) % 3]], p);
                if o < 0.0 {
                    inside = false;
                    break;
                }
                zeros[k] = o == 0.0;
            }
            if inside {
                return Ok(self.classify(t, zeros));
            }
        }
        Err(Error::InvalidArgument(format!("point {p:?} outside the hull")))
    }

    fn classify(&self, t: usize, zeros: [bool; 3]) -> Loc {
        let nz = zeros.iter().filter(|&&z| z).count();
        match nz {
            0 => Loc::Inside(t),
            1 => Loc::OnEdge(t, zeros.iter().position(|&z| z).unwrap()),
            _ => {
                let k = (0..3).find(|&k| !zeros[k]).unwrap();
                Loc::OnVertex(self.tris[t].v[k])
            }
        }
    }

    /// A point within rounding distance of one edge is treated as lying on it, so a planar
    /// split never produces a sliver.
    fn snap_to_edge(&self, t: usize, p: Point) -> Loc {
        let v = self.tris[t].v;
        let mut close = Vec::new();
        for k in 0..3 {
            let a = self.points[v[(k + 1) % 3]];
            let b = self.points[v[(k + 2) % 3]];
            let d = geom::sub(b, a);
            let rel = geom::cross(d, geom::sub(p, a)).abs() / geom::dot(d, d);
            if rel <= 1e-10 {
                close.push(k);
            }
        }
        if close.len() == 1 && self.neighbor_sees(t, close[0], p) {
            Loc::OnEdge(t, close[0])
        } else {
            Loc::Inside(t)
        }
    }

    // p lies strictly inside the two far edges of the triangle across edge k
    fn neighbor_sees(&self, t: usize, k: usize, p: Point) -> bool {
        let n = self.tris[t].nb[k];
        if n == NONE {
            return true;
        }
        let Some(j) = (0..3).find(|&j| self.tris[n].nb[j] == t) else { return false };
        let v = self.tris[n].v;
        [(j + 1) % 3, (j + 2) % 3].iter().all(|&e| {
            let a = self.points[v[(e + 1) % 3]];
            let b = self.points[v[(e + 2) % 3]];
            orient2d(a, b, p) > 0.0
        })
    }

    fn plane_height(&self, t: usize, p: Point) -> f64 {
        let v = self.tris[t].plane;
        let (a, b, c) = (self.points[v[0]], self.points[v[1]], self.points[v[2]]);
        let area = geom::cross(geom::sub(b, a), geom::sub(c, a));
        let l0 = geom::cross(geom::sub(b, p), geom::sub(c, p)) / area;
        let l1 = geom::cross(geom::sub(c, p), geom::sub(a, p)) / area;
        let l2 = 1.0 - l0 - l1;
        l0 * self.heights[v[0]] + l1 * self.heights[v[1]] + l2 * self.heights[v[2]]
    }

    fn insert(&mut self, i: usize, passive: bool) -> Result<bool> {
        let p = self.points[i];
        let mut loc = self.locate(p)?;
        if let Loc::Inside(t) = loc {
            loc = self.snap_to_edge(t, p);
        }
        let seeds: Vec<usize> = match loc {
            Loc::Inside(t) => vec![t],
            Loc::OnEdge(t, k) => {
                let n = self.tris[t].nb[k];
                if n == NONE {
                    vec![t]
                } else {
                    vec![t, n]
                }
            }
            Loc::OnVertex(v) => {
                return Err(Error::Degenerate(format!("point {i} coincides with vertex {v}")));
            }
        };
        if passive {
            self.heights[i] = self.plane_height(seeds[0], p);
        } else if self.below(seeds[0], self.lift(i)) < 0.0 {
            self.state[i] = VertexState::Redundant;
            return Ok(false);
        }
        let lp = self.lift(i);
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
        let ep = self.epoch;
        let mut cavity = seeds.clone();
        for &s in &seeds {
            self.stamp[s] = ep;
        }
        if !passive {
            let mut stack = seeds;
            while let Some(t) = stack.pop() {
                for k in 0..3 {
                    let n = self.tris[t].nb[k];
                    if n != NONE && self.stamp[n] != ep && self.below(n, lp) > 0.0 {
                        self.stamp[n] = ep;
                        cavity.push(n);
                        stack.push(n);
                    }
                }
            }
        }
        // (a, b, outer, owner) for every cavity boundary edge that gets a new triangle
        let edges = loop {
            let mut edges = Vec::new();
            let mut grow = None;
            'scan: for &t in &cavity {
                for k in 0..3 {
                    let n = self.tris[t].nb[k];
                    if n != NONE && self.stamp[n] == ep {
                        continue;
                    }
                    let a = self.tris[t].v[(k + 1) % 3];
                    let b = self.tris[t].v[(k + 2) % 3];
                    let o = orient2d(self.points[a], self.points[b], p);
                    let (pa, pb) = (self.points[a], self.points[b]);
                    if o > 0.0 && !(n != NONE && near_line(pa, pb, p)) {
                        edges.push((a, b, n, t));
                    } else if o == 0.0 && n == NONE && between(pa, pb, p) {
                        continue;
                    } else {
                        grow = Some((n, t));
                        break 'scan;
                    }
                }
            }
            match grow {
                None => break edges,
                Some((n, _)) if n != NONE => {
                    self.stamp[n] = ep;
                    cavity.push(n);
                }
                Some(_) => {
                    return Err(Error::Degenerate(format!("cavity of point {i} is not star-shaped")));
                }
            }
        };
        if !passive {
            let mut on_boundary: Vec<usize> = edges.iter().flat_map(|e| [e.0, e.1]).collect();
            on_boundary.sort_unstable();
            for &t in &cavity {
                for &v in &self.tris[t].v {
                    if on_boundary.binary_search(&v).is_err() {
                        self.state[v] = VertexState::Hidden;
                    }
                }
            }
        }
        let planes: Vec<[usize; 3]> = edges.iter().map(|e| self.tris[e.3].plane).collect();
        for &t in &cavity {
            self.tris[t].alive = false;
            self.free.push(t);
        }
        let mut made: Vec<(usize, usize, usize)> = Vec::with_capacity(edges.len());
        for (&(a, b, outer, _), plane) in edges.iter().zip(planes) {
            let nt = self.new_tri([a, b, i], [NONE, NONE, outer]);
            if passive {
                self.tris[nt].plane = plane;
            }
            self.repoint_edge(outer, a, b, nt);
            made.push((a, b, nt));
        }
        for idx in 0..made.len() {
            let (a, b, nt) = made[idx];
            let from_b = made.iter().find(|e| e.0 == b).map_or(NONE, |e| e.2);
            let to_a = made.iter().find(|e| e.1 == a).map_or(NONE, |e| e.2);
            self.tris[nt].nb[0] = from_b;
            self.tris[nt].nb[1] = to_a;
        }
        self.last = made.last().map_or(self.last, |e| e.2);
        self.state[i] = if passive { VertexState::Passive } else { VertexState::Active };
        Ok(true)
    }

    /// Add points to the triangulation by planar splitting, with heights taken from the envelope.
    pub fn insert_passive(&mut self, which: &[usize]) -> Result<()> {
        for &i in which {
            match self.state[i] {
                VertexState::Active | VertexState::Passive => {}
                _ => {
                    self.insert(i, true)?;
                }
            }
        }
        Ok(())
    }

    /// Insert every point that is not already a vertex.
    pub fn insert_all_passive(&mut self) -> Result<()> {
        let which: Vec<usize> = (0..self.points.len()).collect();
        self.insert_passive(&which)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Heights; for redundant or hidden points these are the input heights.
    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn state(&self) -> &[VertexState] {
        &self.state
    }

    pub fn is_vertex(&self, i: usize) -> bool {
        matches!(self.state[i], VertexState::Active | VertexState::Passive)
    }

    pub fn triangles(&self) -> Vec<[usize; 3]> {
        self.tris.iter().filter(|t| t.alive).map(|t| t.v).collect()
    }

    /// Envelope value at an arbitrary point of the hull.
    pub fn eval(&mut self, p: Point) -> Result<f64> {
        let loc = self.locate(p)?;
        Ok(match loc {
            Loc::Inside(t) | Loc::OnEdge(t, _) => self.plane_height(t, p),
            Loc::OnVertex(v) => self.heights[v],
        })
    }

    /// Envelope values at every input point.
    pub fn values(&mut self) -> Result<Vec<f64>> {
        (0..self.points.len())
            .map(|i| {
                if self.is_vertex(i) {
                    Ok(self.heights[i])
                } else {
                    self.eval(self.points[i])
                }
            })
            .collect()
    }
}

// within rounding of the line through a and b; joining p to that edge would leave a sliver
fn near_line(a: Point, b: Point, p: Point) -> bool {
    let d = geom::sub(b, a);
    geom::cross(d, geom::sub(p, a)).abs() <= 1e-10 * geom::dot(d, d)
}

fn between(a: Point, b: Point, p: Point) -> bool {
    let d = geom::sub(b, a);
    let t = geom::dot(geom::sub(p, a), d);
    t > 0.0 && t < geom::dot(d, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;

    fn brute_lower(points: &[Point], z: &[f64], q: Point) -> f64 {
        // max over planes through triples that lie below all points
        let n = points.len();
        let mut best = f64::NEG_INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let (a, b, c) = (points[i], points[j], points[k]);
                    let det = geom::cross(geom::sub(b, a), geom::sub(c, a));
                    if det.abs() < 1e-12 {
                        continue;
                    }
                    let gx = ((z[j] - z[i]) * (c[1] - a[1]) - (z[k] - z[i]) * (b[1] - a[1])) / det;
                    let gy = ((z[k] - z[i]) * (b[0] - a[0]) - (z[j] - z[i]) * (c[0] - a[0])) / det;
                    let f = |p: Point| z[i] + gx * (p[0] - a[0]) + gy * (p[1] - a[1]);
                    if (0..n).all(|m| f(points[m]) <= z[m] + 1e-9) {
                        best = best.max(f(q));
                    }
                }
            }
        }
        best
    }

    #[test]
    fn matches_brute_force_on_random_points() {
        let mut s = 12345u64;
        let mut r = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64) / ((1u64 << 53) as f64)
        };
        for _ in 0..20 {
            let n = 14;
            let pts: Vec<Point> = (0..n).map(|_| [r(), r()]).collect();
            let z: Vec<f64> = (0..n).map(|_| r()).collect();
            let mut env = Envelope::build(&pts, &z).unwrap();
            for i in 0..n {
                let q = pts[i];
                let e = env.eval(q).unwrap();
                let b = brute_lower(&pts, &z, q);
                assert!((e - b).abs() < 1e-9, "{e} vs {b}");
            }
            let q = [0.37, 0.41];
            if let Ok(e) = env.eval(q) {
                let b = brute_lower(&pts, &z, q);
                assert!((e - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn grid_points_on_a_plane_are_all_kept() {
        let mut pts = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                pts.push([i as f64, j as f64]);
            }
        }
        let z: Vec<f64> = pts.iter().map(|p| 2.0 * p[0] - p[1] + 1.0).collect();
        let env = Envelope::build(&pts, &z).unwrap();
        assert!(env.state().iter().all(|&s| s == VertexState::Active));
        assert_eq!(env.triangles().len(), 32);
    }

    #[test]
    fn passive_chains_stay_on_the_facet() {
        // a wedge with two flat facets, filled by many points inserted one after another
        let corners = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0], [0.0, -1.0], [0.0, 1.0]];
        let f = |p: Point| 0.3 * p[0].abs() + 0.7 * p[1] - 0.2;
        let mut s = 7u64;
        let mut r = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64) / ((1u64 << 53) as f64) * 1.98 - 0.99
        };
        let mut pts: Vec<Point> = corners.to_vec();
        pts.extend((0..400).map(|_| [r(), r()]));
        let z: Vec<f64> = pts.iter().enumerate().map(|(i, &p)| if i < corners.len() { f(p) } else { 10.0 }).collect();
        let mut env = Envelope::build(&pts, &z).unwrap();
        env.insert_all_passive().unwrap();
        for (i, &p) in pts.iter().enumerate().skip(corners.len()) {
            assert!((env.heights()[i] - f(p)).abs() <= 4.0 * f64::EPSILON, "{i}: {}", env.heights()[i] - f(p));
        }
    }

    #[test]
    fn paraboloid_gives_delaunay_and_passive_fill() {
        let mut pts = Vec::new();
        for i in 0..7 {
            for j in 0..7 {
                pts.push([i as f64 * 0.5, j as f64 * 0.5]);
            }
        }
        let z: Vec<f64> = pts.iter().map(|p| p[0] * p[0] + p[1] * p[1]).collect();
        let env = Envelope::build(&pts, &z).unwrap();
        assert_eq!(env.triangles().len(), 72);
        // lift interior values: they become redundant then are split in passively
        let z2: Vec<f64> = pts
            .iter()
            .map(|p| if p[0] > 0.0 && p[0] < 3.0 && p[1] > 0.0 && p[1] < 3.0 { 10.0 } else { 0.0 })
            .collect();
        let mut env = Envelope::build(&pts, &z2).unwrap();
        env.insert_all_passive().unwrap();
        assert_eq!(env.triangles().len(), 72);
        let v = env.values().unwrap();
        assert!(v.iter().all(|x| x.abs() < 1e-15));
    }

    fn links_consistent(env: &Envelope) -> bool {
        env.tris.iter().enumerate().filter(|(_, t)| t.alive).all(|(t, tr)| {
            (0..3).all(|k| {
                let n = tr.nb[k];
                n == NONE || {
                    let o = &env.tris[n];
                    o.alive && o.v.contains(&tr.v[(k + 1) % 3]) && o.v.contains(&tr.v[(k + 2) % 3]) && o.nb.contains(&t)
                }
            })
        })
    }

    #[test]
    fn rough_heights_keep_links_and_vertices() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<Point> = (0..169).map(|k| [-1.0 + (k % 13) as f64 / 6.0, -1.0 + (k / 13) as f64 / 6.0]).collect();
        for _ in 0..50 {
            let z: Vec<f64> = pts.iter().map(|p| 0.5 * (p[0] * p[0] + p[1] * p[1]) + rng.gen_range(-0.3..0.3)).collect();
            let mut env = Envelope::build(&pts, &z).unwrap();
            assert!(links_consistent(&env));
            env.insert_all_passive().unwrap();
            assert!(links_consistent(&env));
            assert!(Mesh::new(pts.clone(), env.triangles()).is_ok());
        }
    }
}
