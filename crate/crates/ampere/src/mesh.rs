//! Triangulations of convex polygons with adjacency and point location.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::envelope::Envelope;
use crate::error::{Error, Result};
use crate::geom::{self, Point};

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    /// Triangle across the edge opposite each corner.
    adjacency: Vec<[Option<usize>; 3]>,
    vertex_triangles: Vec<Vec<usize>>,
    hull: Vec<Point>,
    locator: Locator,
}

#[derive(Debug, Clone)]
struct Locator {
    lo: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl Mesh {
    /// Build from vertices and triangles. Orientation is normalized to counterclockwise;
    /// the triangles must tile the convex hull of the vertices.
    pub fn new(vertices: Vec<Point>, mut triangles: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        if triangles.is_empty() {
            return Err(Error::Degenerate("mesh without triangles".into()));
        }
        let mut used = vec![false; n];
        let mut area = 0.0;
        for t in triangles.iter_mut() {
            if t.iter().any(|&i| i >= n) {
                return Err(Error::InvalidArgument("triangle index out of range".into()));
            }
            let a = geom::triangle_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if a == 0.0 {
                return Err(Error::Degenerate(format!("zero-area triangle {t:?}")));
            }
            if a < 0.0 {
                t.swap(1, 2);
            }
            area += a.abs();
            for &i in t.iter() {
                used[i] = true;
            }
        }
        if let Some(i) = used.iter().position(|&u| !u) {
            return Err(Error::InvalidArgument(format!("vertex {i} is not used by any triangle")));
        }
        let hull = geom::convex_hull(&vertices);
        let hull_area = geom::polygon_area(&hull);
        if (area - hull_area).abs() > 1e-9 * hull_area.max(1e-300) {
            return Err(Error::NotConvex(format!(
                "triangles cover {area} of hull area {hull_area}"
            )));
        }
        let mut edge_map: HashMap<(usize, usize), (usize, usize)> = HashMap::with_capacity(3 * triangles.len());
        let mut adjacency = vec![[None; 3]; triangles.len()];
        for (ti, t) in triangles.iter().enumerate() {
            for k in 0..3 {
                let a = t[(k + 1) % 3];
                let b = t[(k + 2) % 3];
                if edge_map.contains_key(&(a, b)) {
                    return Err(Error::InvalidArgument(format!("edge ({a},{b}) used twice")));
                }
                edge_map.insert((a, b), (ti, k));
            }
        }
        let mut boundary = vec![false; n];
        for (&(a, b), &(ti, k)) in &edge_map {
            match edge_map.get(&(b, a)) {
                Some(&(tj, _)) => adjacency[ti][k] = Some(tj),
                None => {
                    boundary[a] = true;
                    boundary[b] = true;
                }
            }
        }
        let mut vertex_triangles = vec![Vec::new(); n];
        for (ti, t) in triangles.iter().enumerate() {
            for &i in t {
                vertex_triangles[i].push(ti);
            }
        }
        let locator = Locator::build(&vertices, &triangles);
        Ok(Mesh { vertices, triangles, boundary, adjacency, vertex_triangles, hull, locator })
    }

    /// Delaunay triangulation of the points (regular triangulation of the paraboloid lift).
    pub fn delaunay(points: Vec<Point>) -> Result<Self> {
        let z: Vec<f64> = points.iter().map(|p| geom::dot(*p, *p)).collect();
        let mut env = Envelope::build(&points, &z)?;
        env.insert_all_passive()?;
        Mesh::new(points, env.triangles())
    }

    /// Uniform `n x n`-cell grid on `[lo, hi]²` with all diagonals running south-west to north-east.
    pub fn square_grid(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Mesh::rect_grid([n, n], [lo, lo], [hi, hi])
    }

    /// `cells[0] x cells[1]` grid on the box `[lo, hi]`, vertices numbered row by row.
    pub fn rect_grid(cells: [usize; 2], lo: Point, hi: Point) -> Result<Self> {
        let [nx, ny] = cells;
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidArgument("grid needs at least one cell".into()));
        }
        let hx = (hi[0] - lo[0]) / nx as f64;
        let hy = (hi[1] - lo[1]) / ny as f64;
        let mut v = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                v.push([lo[0] + i as f64 * hx, lo[1] + j as f64 * hy]);
            }
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut t = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                t.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                t.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        Mesh::new(v, t)
    }

    /// Delaunay mesh of a convex polygon: edges sampled at spacing at most `h`, interior
    /// lattice points of spacing `h` kept away from the boundary.
    pub fn polygon(domain: &geom::ConvexDomain, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidArgument(format!("mesh size {h}")));
        }
        let vs = domain.vertices();
        let n = vs.len();
        let mut pts = Vec::new();
        for i in 0..n {
            let a = vs[i];
            let b = vs[(i + 1) % n];
            let k = (geom::dist(a, b) / h).ceil().max(1.0) as usize;
            for s in 0..k {
                pts.push(geom::lerp(a, b, s as f64 / k as f64));
            }
        }
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in vs {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let nx = ((hi[0] - lo[0]) / h).ceil() as usize;
        let ny = ((hi[1] - lo[1]) / h).ceil() as usize;
        for j in 0..=ny {
            for i in 0..=nx {
                let p = [lo[0] + i as f64 * h, lo[1] + j as f64 * h];
                if domain.boundary_distance(p) > 0.45 * h {
                    pts.push(p);
                }
            }
        }
        Mesh::delaunay(pts)
    }

    /// Concentric-ring mesh of the disk: a center vertex, `rings` circles, the first one
    /// carrying `apex_degree` points and ring `k` at least about `2πk` points.
    pub fn disk(radius: f64, rings: usize, apex_degree: usize) -> Result<Self> {
        Mesh::delaunay(disk_points(radius, rings, apex_degree))
    }

    /// Disk mesh of `rays` spokes and `rings` circles sharing the spokes. Every cell between
    /// two spokes and two rings is split along one diagonal.
    pub fn spoke_disk(radius: f64, rays: usize, rings: usize) -> Result<Self> {
        if rays < 3 || rings == 0 {
            return Err(Error::InvalidArgument("spoke mesh needs 3 rays and a ring".into()));
        }
        let mut v = vec![[0.0, 0.0]];
        for k in 1..=rings {
            let r = radius * k as f64 / rings as f64;
            for j in 0..rays {
                let a = 2.0 * PI * j as f64 / rays as f64;
                v.push([r * a.cos(), r * a.sin()]);
            }
        }
        let id = |k: usize, j: usize| 1 + (k - 1) * rays + (j % rays);
        let mut t = Vec::new();
        for j in 0..rays {
            t.push([0, id(1, j), id(1, j + 1)]);
        }
        for k in 1..rings {
            for j in 0..rays {
                t.push([id(k, j), id(k + 1, j), id(k + 1, j + 1)]);
                t.push([id(k, j), id(k + 1, j + 1), id(k, j + 1)]);
            }
        }
        Mesh::new(v, t)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.vertices.len()).filter(|&v| !self.boundary[v]).collect()
    }

    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.vertices.len()).filter(|&v| self.boundary[v]).collect()
    }

    pub fn vertex_triangles(&self, v: usize) -> &[usize] {
        &self.vertex_triangles[v]
    }

    pub fn adjacency(&self, t: usize) -> [Option<usize>; 3] {
        self.adjacency[t]
    }

    /// Counterclockwise hull polygon of the mesh.
    pub fn hull(&self) -> &[Point] {
        &self.hull
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        geom::triangle_area(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    /// Longest edge length.
    pub fn h_max(&self) -> f64 {
        let mut h: f64 = 0.0;
        for t in &self.triangles {
            for k in 0..3 {
                h = h.max(geom::dist(self.vertices[t[k]], self.vertices[t[(k + 1) % 3]]));
            }
        }
        h
    }

    pub fn diameter(&self) -> f64 {
        geom::diameter(&self.hull)
    }

    /// Distance from `p` to the hull boundary.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        let n = self.hull.len();
        (0..n)
            .map(|i| geom::point_segment_distance(p, self.hull[i], self.hull[(i + 1) % n]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Vertex neighbours through triangle edges.
    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.vertex_triangles[v]
            .iter()
            .flat_map(|&t| self.triangles[t])
            .filter(|&w| w != v)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Triangle containing `p` and barycentric coordinates; tolerant to rounding at the hull.
    pub fn locate(&self, p: Point) -> Option<(usize, [f64; 3])> {
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in self.locator.candidates(p) {
            let t = t as usize;
            let b = self.barycentric(t, p);
            let m = b[0].min(b[1]).min(b[2]);
            if m >= 0.0 {
                return Some((t, b));
            }
            if best.as_ref().is_none_or(|x| m > x.2) {
                best = Some((t, b, m));
            }
        }
        match best {
            Some((t, b, m)) if m > -1e-9 => Some((t, b)),
            _ => None,
        }
    }

    pub fn barycentric(&self, t: usize, p: Point) -> [f64; 3] {
        let [i, j, k] = self.triangles[t];
        let (a, b, c) = (self.vertices[i], self.vertices[j], self.vertices[k]);
        let area = geom::cross(geom::sub(b, a), geom::sub(c, a));
        let l0 = geom::cross(geom::sub(b, p), geom::sub(c, p)) / area;
        let l1 = geom::cross(geom::sub(c, p), geom::sub(a, p)) / area;
        [l0, l1, 1.0 - l0 - l1]
    }

    /// Mesh with every vertex mapped by `f` (which should be affine and invertible).
    pub fn mapped(&self, f: impl Fn(Point) -> Point) -> Result<Self> {
        Mesh::new(self.vertices.iter().map(|&p| f(p)).collect(), self.triangles.clone())
    }

    pub fn same_vertices(&self, other: &Mesh) -> bool {
        self.vertices == other.vertices
    }
}

impl Locator {
    fn build(v: &[Point], t: &[[usize; 3]]) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in v {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let w = (hi[0] - lo[0]).max(1e-300);
        let hgt = (hi[1] - lo[1]).max(1e-300);
        let target = (t.len() as f64 / 2.0).max(1.0);
        let cell = (w * hgt / target).sqrt().max(1e-300);
        let nx = ((w / cell).ceil() as usize).clamp(1, 4096);
        let ny = ((hgt / cell).ceil() as usize).clamp(1, 4096);
        let cell = (w / nx as f64).max(hgt / ny as f64);
        let mut buckets = vec![Vec::new(); nx * ny];
        for (ti, tri) in t.iter().enumerate() {
            let mut a = [f64::INFINITY; 2];
            let mut b = [f64::NEG_INFINITY; 2];
            for &i in tri {
                for d in 0..2 {
                    a[d] = a[d].min(v[i][d]);
                    b[d] = b[d].max(v[i][d]);
                }
            }
            let (i0, j0) = cell_of(lo, cell, nx, ny, a);
            let (i1, j1) = cell_of(lo, cell, nx, ny, b);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * nx + i].push(ti as u32);
                }
            }
        }
        Locator { lo, cell, nx, ny, buckets }
    }

    fn candidates(&self, p: Point) -> &[u32] {
        let (i, j) = cell_of(self.lo, self.cell, self.nx, self.ny, p);
        &self.buckets[j * self.nx + i]
    }
}

fn cell_of(lo: Point, cell: f64, nx: usize, ny: usize, p: Point) -> (usize, usize) {
    let i = ((p[0] - lo[0]) / cell).floor().clamp(0.0, (nx - 1) as f64) as usize;
    let j = ((p[1] - lo[1]) / cell).floor().clamp(0.0, (ny - 1) as f64) as usize;
    (i, j)
}

/// Points of the concentric-ring disk mesh. Rings are rotated by irrational fractions of
/// their spacing so that no two rings share a ray through the center.
pub fn disk_points(radius: f64, rings: usize, apex_degree: usize) -> Vec<Point> {
    let mut pts = vec![[0.0, 0.0]];
    for k in 1..=rings {
        let r = radius * k as f64 / rings as f64;
        let m = apex_degree.max((2.0 * PI * k as f64).round() as usize);
        let off = (k as f64 * 0.618_033_988_749_894_9).fract();
        for j in 0..m {
            let a = 2.0 * PI * (j as f64 + off) / m as f64;
            pts.push([r * a.cos(), r * a.sin()]);
        }
    }
    pts
}
