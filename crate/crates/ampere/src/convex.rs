//! Piecewise-linear convex functions: subdifferentials, Monge-Ampère measures,
//! Legendre transforms and the comparison tools built on them.

use serde::{Deserialize, Serialize};

use crate::envelope::{Envelope, VertexState};
use crate::error::{Error, Result};
use crate::geom::{self, Point};
use crate::mesh::Mesh;
use crate::tol::Tolerances;

/// Gradient of the affine interpolant on a triangle.
pub fn triangle_gradient(a: Point, b: Point, c: Point, za: f64, zb: f64, zc: f64) -> Point {
    let det = geom::cross(geom::sub(b, a), geom::sub(c, a));
    let gx = ((zb - za) * (c[1] - a[1]) - (zc - za) * (b[1] - a[1])) / det;
    let gy = ((zc - za) * (b[0] - a[0]) - (zb - za) * (c[0] - a[0])) / det;
    [gx, gy]
}

/// A piecewise-linear function on a mesh, convex or not.
#[derive(Debug, Clone)]
pub struct PlFunction {
    mesh: Mesh,
    values: Vec<f64>,
    gradients: Vec<Point>,
}

impl PlFunction {
    pub fn new(mesh: Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.vertices().len() {
            return Err(Error::InvalidArgument("one value per vertex required".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite vertex value".into()));
        }
        let v = mesh.vertices();
        let gradients = mesh
            .triangles()
            .iter()
            .map(|&[i, j, k]| triangle_gradient(v[i], v[j], v[k], values[i], values[j], values[k]))
            .collect();
        Ok(PlFunction { mesh, values, gradients })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn gradients(&self) -> &[Point] {
        &self.gradients
    }

    pub fn eval(&self, p: Point) -> Option<f64> {
        let (t, b) = self.mesh.locate(p)?;
        let [i, j, k] = self.mesh.triangles()[t];
        Some(b[0] * self.values[i] + b[1] * self.values[j] + b[2] * self.values[k])
    }

    /// Smallest normalized gradient jump across interior edges (negative means a concave kink).
    pub fn min_edge_jump(&self) -> (f64, Option<(usize, usize)>) {
        let mut worst = f64::INFINITY;
        let mut at = None;
        let v = self.mesh.vertices();
        for (t, tri) in self.mesh.triangles().iter().enumerate() {
            for (k, nb) in self.mesh.adjacency(t).iter().enumerate() {
                let Some(u) = *nb else { continue };
                if u < t {
                    continue;
                }
                let a = v[tri[(k + 1) % 3]];
                let b = v[tri[(k + 2) % 3]];
                let l = geom::dist(a, b);
                let g1 = self.gradients[t];
                let g2 = self.gradients[u];
                let scale = 1.0f64.max(geom::norm(g1)).max(geom::norm(g2));
                let (area_t, area_u) = (self.mesh.triangle_area(t), self.mesh.triangle_area(u));
                // normal-derivative jump from the lifted tetrahedron volume, stable on slivers
                let d = self.mesh.triangles()[u].into_iter().find(|&w| w != tri[(k + 1) % 3] && w != tri[(k + 2) % 3]).unwrap();
                let lift = |w: usize| [v[w][0], v[w][1], self.values[w]];
                let vol6 = geom::orient3d(lift(tri[0]), lift(tri[1]), lift(tri[2]), lift(d));
                let jump = -vol6 * l / (4.0 * area_t * area_u) / scale;
                if jump < worst {
                    worst = jump;
                    at = Some((t, u));
                }
            }
        }
        (worst, at)
    }
}

/// Certified convex piecewise-linear function.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "PlRepr", into = "PlRepr")]
pub struct PlConvexFunction {
    f: PlFunction,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlRepr {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub values: Vec<f64>,
}

impl TryFrom<PlRepr> for PlConvexFunction {
    type Error = Error;
    fn try_from(r: PlRepr) -> Result<Self> {
        PlConvexFunction::new(Mesh::new(r.vertices, r.triangles)?, r.values, Tolerances::default().conv)
    }
}

impl From<PlConvexFunction> for PlRepr {
    fn from(f: PlConvexFunction) -> Self {
        PlRepr {
            vertices: f.mesh().vertices().to_vec(),
            triangles: f.mesh().triangles().to_vec(),
            values: f.values().to_vec(),
        }
    }
}

impl std::ops::Deref for PlConvexFunction {
    type Target = PlFunction;
    fn deref(&self) -> &PlFunction {
        &self.f
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubdifferentialPolytope {
    pub vertex: usize,
    /// Counterclockwise hull of incident gradients (one or two points when degenerate).
    pub slopes: Vec<Point>,
}

impl SubdifferentialPolytope {
    pub fn area(&self) -> f64 {
        if self.slopes.len() < 3 {
            0.0
        } else {
            geom::polygon_area(&self.slopes)
        }
    }

    pub fn centroid(&self) -> Point {
        geom::polygon_centroid(&self.slopes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub sites: Vec<Point>,
    pub masses: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(sites: Vec<Point>, masses: Vec<f64>) -> Result<Self> {
        if sites.len() != masses.len() {
            return Err(Error::InvalidArgument("sites and masses differ in length".into()));
        }
        if masses.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::InvalidArgument("masses must be finite and nonnegative".into()));
        }
        Ok(DiscreteMeasure { sites, masses })
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }
}

impl PlConvexFunction {
    pub fn new(mesh: Mesh, values: Vec<f64>, tol_conv: f64) -> Result<Self> {
        let f = PlFunction::new(mesh, values)?;
        certify(&f, tol_conv)?;
        Ok(PlConvexFunction { f })
    }

    pub fn new_unchecked(mesh: Mesh, values: Vec<f64>) -> Result<Self> {
        Ok(PlConvexFunction { f: PlFunction::new(mesh, values)? })
    }

    pub fn from_pl(f: PlFunction, tol_conv: f64) -> Result<Self> {
        certify(&f, tol_conv)?;
        Ok(PlConvexFunction { f })
    }

    /// Convex envelope of the samples; every point becomes a vertex, points above the
    /// envelope get the envelope value.
    pub fn envelope(points: &[Point], values: &[f64]) -> Result<Self> {
        Ok(Self::envelope_with_contact(points, values)?.0)
    }

    /// As [`envelope`](Self::envelope), also flagging the points that touch it.
    pub fn envelope_with_contact(points: &[Point], values: &[f64]) -> Result<(Self, Vec<bool>)> {
        let mut env = Envelope::build(points, values)?;
        let contact: Vec<bool> = env.state().iter().map(|&s| s == VertexState::Active).collect();
        env.insert_all_passive()?;
        let mesh = Mesh::new(points.to_vec(), env.triangles())?;
        let f = PlFunction::new(mesh, env.heights().to_vec())?;
        Ok((PlConvexFunction { f }, contact))
    }

    pub fn as_pl(&self) -> &PlFunction {
        &self.f
    }

    pub fn subdifferential(&self, v: usize) -> Result<SubdifferentialPolytope> {
        if v >= self.mesh().vertices().len() {
            return Err(Error::InvalidArgument(format!("vertex {v} out of range")));
        }
        if self.mesh().is_boundary(v) {
            return Err(Error::BoundaryVertex(v));
        }
        let g: Vec<Point> = self.mesh().vertex_triangles(v).iter().map(|&t| self.gradients()[t]).collect();
        Ok(SubdifferentialPolytope { vertex: v, slopes: geom::convex_hull(&g) })
    }

    /// Monge-Ampère measure: subdifferential areas at the interior vertices.
    pub fn ma_measure(&self, tol_conv: f64) -> Result<DiscreteMeasure> {
        certify(&self.f, tol_conv)?;
        Ok(self.ma_measure_unchecked())
    }

    pub fn ma_measure_unchecked(&self) -> DiscreteMeasure {
        let iv = self.mesh().interior_vertices();
        let sites = iv.iter().map(|&v| self.mesh().vertices()[v]).collect();
        let masses = iv
            .iter()
            .map(|&v| self.subdifferential(v).map(|s| s.area()).unwrap_or(0.0))
            .collect();
        DiscreteMeasure { sites, masses }
    }

    /// Mass per vertex (zero on the boundary).
    pub fn vertex_masses(&self) -> Vec<f64> {
        (0..self.mesh().vertices().len())
            .map(|v| self.subdifferential(v).map(|s| s.area()).unwrap_or(0.0))
            .collect()
    }

    /// A chosen subgradient at an interior vertex: the centroid of its subdifferential.
    pub fn slope(&self, v: usize) -> Result<Point> {
        Ok(self.subdifferential(v)?.centroid())
    }

    /// `sup_x (x·p − u(x))`, attained at a vertex.
    pub fn legendre_value(&self, p: Point) -> f64 {
        self.mesh()
            .vertices()
            .iter()
            .zip(self.values())
            .map(|(x, u)| geom::dot(*x, p) - u)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Legendre transform on the hull of the triangle gradients.
    pub fn legendre_transform(&self) -> Result<LegendreDual> {
        let scale = self.gradients().iter().map(|g| geom::norm(*g)).fold(1.0, f64::max);
        let mut nodes: Vec<Point> = self.gradients().to_vec();
        nodes.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        let mut uniq: Vec<Point> = Vec::with_capacity(nodes.len());
        for g in nodes {
            if !uniq.iter().rev().take(64).any(|q| geom::dist(*q, g) <= 1e-12 * scale) {
                uniq.push(g);
            }
        }
        let values: Vec<f64> = uniq.iter().map(|&p| self.legendre_value(p)).collect();
        let function = if geom::convex_hull(&uniq).len() >= 3 {
            Some(PlConvexFunction::envelope(&uniq, &values)?)
        } else {
            None
        };
        Ok(LegendreDual { nodes: uniq, values, function })
    }

    /// Whether `p` belongs to the normal image of the interior: the lowest plane of slope `p`
    /// touches the graph at an interior vertex.
    pub fn in_normal_image(&self, p: Point, tol: f64) -> bool {
        let v = self.mesh().vertices();
        let h: Vec<f64> = v.iter().zip(self.values()).map(|(x, u)| u - geom::dot(*x, p)).collect();
        let m = h.iter().cloned().fold(f64::INFINITY, f64::min);
        let scale = h.iter().map(|x| x.abs()).fold(1.0, f64::max);
        (0..v.len()).any(|i| !self.mesh().is_boundary(i) && h[i] <= m + tol * scale)
    }

    /// Aleksandrov's maximum principle for functions vanishing on the boundary.
    pub fn aleksandrov_bound(&self, tol: &Tolerances) -> Result<AleksandrovReport> {
        let mesh = self.mesh();
        let vmax = self.values().iter().map(|x| x.abs()).fold(1.0, f64::max);
        for v in mesh.boundary_vertices() {
            if self.values()[v].abs() > tol.bc * vmax {
                return Err(Error::Precondition(format!(
                    "boundary value {} at vertex {v} is not zero",
                    self.values()[v]
                )));
            }
        }
        let total = self.ma_measure(tol.conv)?.total();
        let d = mesh.diameter();
        // dimensional constant, equal to one in the plane
        let c2 = 1.0;
        let mut rows = Vec::new();
        let mut pass = true;
        for v in mesh.interior_vertices() {
            let lhs = self.values()[v].powi(2);
            let rhs = c2 * d * mesh.boundary_distance(mesh.vertices()[v]) * total;
            let ok = lhs <= rhs * (1.0 + tol.ineq) + tol.abs;
            pass &= ok;
            rows.push(BoundRow { vertex: v, lhs, rhs, pass: ok });
        }
        Ok(AleksandrovReport { rows, pass, total_mass: total })
    }

    /// Every subdifferential slope obeys the boundary-oscillation bound.
    pub fn slope_bound_check(&self, tol: &Tolerances) -> bool {
        let mesh = self.mesh();
        let bmax = mesh
            .boundary_vertices()
            .iter()
            .map(|&v| self.values()[v])
            .fold(f64::NEG_INFINITY, f64::max);
        mesh.interior_vertices().iter().all(|&v| {
            let d = mesh.boundary_distance(mesh.vertices()[v]);
            let bound = (bmax - self.values()[v]) / d;
            self.subdifferential(v)
                .map(|s| s.slopes.iter().all(|p| geom::norm(*p) <= bound * (1.0 + tol.ineq) + tol.geom))
                .unwrap_or(false)
        })
    }
}

#[derive(Debug, Clone)]
pub struct LegendreDual {
    pub nodes: Vec<Point>,
    pub values: Vec<f64>,
    /// Present when the gradient hull has positive area.
    pub function: Option<PlConvexFunction>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundRow {
    pub vertex: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AleksandrovReport {
    pub rows: Vec<BoundRow>,
    pub pass: bool,
    pub total_mass: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonVerdict {
    pub pass: bool,
    /// `min (u − v)` over vertices.
    pub min_gap: f64,
}

fn certify(f: &PlFunction, tol_conv: f64) -> Result<()> {
    let (jump, at) = f.min_edge_jump();
    if jump < -tol_conv {
        return Err(Error::ConvexityCertificate(format!(
            "gradient jump {jump:e} across triangles {at:?}"
        )));
    }
    Ok(())
}

/// If `Mv ≥ Mu` and `u ≥ v` on the boundary then `u ≥ v` inside. Both functions must
/// share their vertex set.
pub fn comparison_check(u: &PlConvexFunction, v: &PlConvexFunction, tol: &Tolerances) -> Result<ComparisonVerdict> {
    if !u.mesh().same_vertices(v.mesh()) {
        return Err(Error::MeshMismatch("vertex sets differ".into()));
    }
    let mu = u.ma_measure(tol.conv)?;
    let mv = v.ma_measure(tol.conv)?;
    for (i, (a, b)) in mu.masses.iter().zip(&mv.masses).enumerate() {
        if *b < *a - tol.meas * a.max(1.0) {
            return Err(Error::Precondition(format!("measure of v below that of u at interior site {i}")));
        }
    }
    let scale = u.values().iter().chain(v.values()).map(|x| x.abs()).fold(1.0, f64::max);
    for w in u.mesh().boundary_vertices() {
        if u.values()[w] < v.values()[w] - tol.bc * scale {
            return Err(Error::Precondition(format!("u < v at boundary vertex {w}")));
        }
    }
    let min_gap = u
        .values()
        .iter()
        .zip(v.values())
        .map(|(a, b)| a - b)
        .fold(f64::INFINITY, f64::min);
    Ok(ComparisonVerdict { pass: min_gap >= -tol.cmp, min_gap })
}
