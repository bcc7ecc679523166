//! Dirichlet problems for the Monge-Ampère equation in the Aleksandrov sense.

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::convex::{triangle_gradient, DiscreteMeasure, PlConvexFunction, PlFunction};
use crate::envelope::{Envelope, VertexState};
use crate::error::{Error, Result};
use crate::geom::{self, ConvexDomain, Point};
use crate::mesh::Mesh;
use crate::sparse::CsrBuilder;
use crate::tol::Tolerances;

/// Geometry of the domain together with a convex defining function `ρ` (`ρ ≤ 0` inside).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainShape {
    Disk { center: Point, radius: f64 },
    Polygon { domain: ConvexDomain },
}

impl DomainShape {
    pub fn unit_disk() -> Self {
        DomainShape::Disk { center: [0.0, 0.0], radius: 1.0 }
    }

    /// `|x−c|²−R²` for disks; for polygons a log-sum-exp smoothing of the half-plane
    /// offsets, shifted so it never exceeds their maximum.
    pub fn rho(&self, p: Point) -> f64 {
        match self {
            DomainShape::Disk { center, radius } => {
                let d = geom::sub(p, *center);
                geom::dot(d, d) - radius * radius
            }
            DomainShape::Polygon { domain } => {
                let k = 10.0 / domain.diameter();
                let hp = domain.half_planes();
                let offs: Vec<f64> = hp.iter().map(|&(n, b)| geom::dot(n, p) - b).collect();
                let m = offs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let s: f64 = offs.iter().map(|o| (k * (o - m)).exp()).sum();
                m + (s.ln() - (hp.len() as f64).ln()) / k
            }
        }
    }

    pub fn mesh(&self, h: f64) -> Result<Mesh> {
        match self {
            DomainShape::Disk { center, radius } => {
                let rings = (radius / h).ceil().max(1.0) as usize;
                Mesh::disk(*radius, rings, 6)?.mapped(|p| geom::add(p, *center))
            }
            DomainShape::Polygon { domain } => Mesh::polygon(domain, h),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureSpec {
    Zero,
    Dirac(DiscreteMeasure),
    /// Density per triangle of the problem mesh.
    Density(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct DirichletProblem {
    pub mesh: Mesh,
    pub shape: DomainShape,
    /// Boundary data per vertex; entries at interior vertices are ignored.
    pub boundary: Vec<f64>,
    pub measure: MeasureSpec,
}

impl DirichletProblem {
    pub fn new(mesh: Mesh, shape: DomainShape, g: impl Fn(Point) -> f64, measure: MeasureSpec) -> Result<Self> {
        let boundary: Vec<f64> = mesh
            .vertices()
            .iter()
            .zip(mesh.boundary_flags())
            .map(|(&p, &b)| if b { g(p) } else { 0.0 })
            .collect();
        if boundary.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite boundary data".into()));
        }
        if let MeasureSpec::Density(f) = &measure {
            if f.len() != mesh.triangles().len() {
                return Err(Error::InvalidArgument("one density value per triangle expected".into()));
            }
        }
        Ok(DirichletProblem { mesh, shape, boundary, measure })
    }

    fn strictly_convex_boundary(&self) -> bool {
        let hull_corners = geom::convex_hull_indices(self.mesh.vertices()).len();
        hull_corners == self.mesh.boundary_vertices().len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Init {
    Default,
    /// Dirac sites start this far below the homogeneous solution; densities scale the
    /// barrier coefficient by `1 + offset`.
    Offset(f64),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Relative per-site mass tolerance.
    pub tol: f64,
    pub max_iter: usize,
    pub init: Init,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: Tolerances::default().solve, max_iter: 100_000, init: Init::Default }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AleksandrovSolution {
    pub u: PlConvexFunction,
    /// Vertices carrying prescribed mass.
    pub sites: Vec<usize>,
    pub targets: Vec<f64>,
    pub masses: Vec<f64>,
    /// `|mass − target| / target` per site.
    pub residual: Vec<f64>,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

impl AleksandrovSolution {
    pub fn max_residual(&self) -> f64 {
        self.residual.iter().cloned().fold(0.0, f64::max)
    }
}

pub fn solve(problem: &DirichletProblem, opts: &SolveOptions) -> Result<AleksandrovSolution> {
    match &problem.measure {
        MeasureSpec::Zero => solve_homogeneous(problem),
        MeasureSpec::Dirac(_) => solve_dirac(problem, opts),
        MeasureSpec::Density(_) => solve_density(problem, opts),
    }
}

fn domain_warnings(problem: &DirichletProblem) -> Vec<String> {
    let mut w = Vec::new();
    if !problem.strictly_convex_boundary() {
        w.push("domain boundary has straight segments; strict convexity not available".into());
    }
    w
}

/// Envelope of the given data; points listed in `free` get their envelope value.
fn envelope_solution(points: &[Point], data: &[f64], free: &[bool]) -> Result<(PlConvexFunction, Vec<bool>)> {
    let top = data
        .iter()
        .zip(free)
        .filter(|(_, f)| !**f)
        .map(|(z, _)| *z)
        .fold(f64::NEG_INFINITY, f64::max);
    let lift = top.abs() + 1.0 + top;
    let z: Vec<f64> = data.iter().zip(free).map(|(&v, &f)| if f { lift } else { v }).collect();
    PlConvexFunction::envelope_with_contact(points, &z)
}

fn boundary_warnings(u: &PlConvexFunction, problem: &DirichletProblem, scale: f64, tol_bc: f64) -> Vec<String> {
    let mut w = Vec::new();
    let off: Vec<usize> = problem
        .mesh
        .boundary_vertices()
        .into_iter()
        .filter(|&v| (u.values()[v] - problem.boundary[v]).abs() > tol_bc * scale)
        .collect();
    if !off.is_empty() {
        w.push(format!("{} boundary vertices lie above the envelope of the data", off.len()));
    }
    w
}

/// Zero measure: the convex envelope of the boundary data.
pub fn solve_homogeneous(problem: &DirichletProblem) -> Result<AleksandrovSolution> {
    let mesh = &problem.mesh;
    let free: Vec<bool> = mesh.boundary_flags().iter().map(|b| !b).collect();
    let (u, _) = envelope_solution(mesh.vertices(), &problem.boundary, &free)?;
    let scale = problem.boundary.iter().map(|x| x.abs()).fold(1.0, f64::max);
    let mut warnings = domain_warnings(problem);
    warnings.extend(boundary_warnings(&u, problem, scale, Tolerances::default().bc));
    Ok(AleksandrovSolution {
        u,
        sites: Vec::new(),
        targets: Vec::new(),
        masses: Vec::new(),
        residual: Vec::new(),
        iterations: 0,
        warnings,
    })
}

/// Area of `{p : p·(x_j − x_i) ≤ z_j − z_i for all data points j}`.
fn site_mass(points: &[Point], z: &[f64], data: &[usize], i: usize, zi: f64, radius: f64) -> f64 {
    let r = radius;
    let mut poly = vec![[-r, -r], [r, -r], [r, r], [-r, r]];
    let xi = points[i];
    for &j in data {
        if j == i {
            continue;
        }
        poly = geom::clip_halfplane(&poly, geom::sub(points[j], xi), z[j] - zi);
        if poly.len() < 3 {
            return 0.0;
        }
    }
    geom::polygon_area(&poly).max(0.0)
}

fn slope_radius(z: &[f64], data: &[usize], zi: f64, dist: f64) -> f64 {
    let top = data.iter().map(|&j| z[j]).fold(f64::NEG_INFINITY, f64::max);
    2.0 * (top - zi).max(0.0) / dist + 1.0
}

/// Value at site `i` giving it mass `a`, other data fixed.
fn match_site(points: &[Point], z: &[f64], data: &[usize], i: usize, a: f64, dist: f64) -> f64 {
    let mass = |zi: f64| site_mass(points, z, data, i, zi, slope_radius(z, data, zi, dist));
    let z0 = z[i];
    let m0 = mass(z0);
    if (m0 - a).abs() <= 1e-14 * a {
        return z0;
    }
    let mut step = (a.sqrt() * dist).max(1e-12);
    let (mut lo, mut hi) = if m0 < a { (z0 - step, z0) } else { (z0, z0 + step) };
    if m0 < a {
        while mass(lo) < a {
            step *= 2.0;
            lo = hi - step;
        }
    } else {
        while mass(hi) > a {
            step *= 2.0;
            hi = lo + step;
        }
    }
    // f(z) = sqrt(mass) − sqrt(a) is decreasing and close to affine.
    let sa = a.sqrt();
    let mut flo = mass(lo).sqrt() - sa;
    let mut fhi = mass(hi).sqrt() - sa;
    let mut side = 0i8;
    let mut best = (lo + hi) / 2.0;
    for _ in 0..200 {
        let mut c = if flo > fhi { lo + flo * (hi - lo) / (flo - fhi) } else { (lo + hi) / 2.0 };
        if !(c > lo && c < hi) {
            c = (lo + hi) / 2.0;
        }
        let fc = mass(c).sqrt() - sa;
        best = c;
        if fc.abs() <= 1e-15 * sa || hi - lo <= 1e-16 * (1.0 + c.abs()) {
            break;
        }
        if fc > 0.0 {
            lo = c;
            flo = fc;
            if side == 1 {
                fhi /= 2.0;
            }
            side = 1;
        } else {
            hi = c;
            fhi = fc;
            if side == -1 {
                flo /= 2.0;
            }
            side = -1;
        }
    }
    best
}

/// Point set of the problem mesh plus Dirac sites that are not mesh vertices.
fn site_points(mesh: &Mesh, sites: &[Point]) -> (Vec<Point>, Vec<usize>) {
    let mut pts = mesh.vertices().to_vec();
    let scale = mesh.diameter();
    let mut idx = Vec::with_capacity(sites.len());
    for &s in sites {
        let hit = mesh
            .locate(s)
            .and_then(|(t, _)| mesh.triangles()[t].iter().copied().find(|&v| geom::dist(pts[v], s) <= 1e-12 * scale));
        match hit {
            Some(v) => idx.push(v),
            None => {
                idx.push(pts.len());
                pts.push(s);
            }
        }
    }
    (pts, idx)
}

/// Finitely many Dirac masses: Gauss-Seidel sweeps over the sites, each one matching its
/// own mass exactly with the others frozen.
pub fn solve_dirac(problem: &DirichletProblem, opts: &SolveOptions) -> Result<AleksandrovSolution> {
    let MeasureSpec::Dirac(mu) = &problem.measure else {
        return Err(Error::InvalidArgument("expected Dirac masses".into()));
    };
    let mesh = &problem.mesh;
    let hull = mesh.hull();
    for (k, s) in mu.sites.iter().enumerate() {
        let d = mesh.boundary_distance(*s);
        if !(d > 1e-12 * mesh.diameter()) || !inside_hull(hull, *s) {
            return Err(Error::Precondition(format!("site {k} is not interior")));
        }
        if !(mu.masses[k] > 0.0) {
            return Err(Error::Precondition(format!("site {k} has non-positive mass")));
        }
    }
    let (pts, site_idx) = site_points(mesh, &mu.sites);
    let mut order: Vec<usize> = (0..site_idx.len()).collect();
    order.sort_by(|&a, &b| {
        let (p, q) = (pts[site_idx[a]], pts[site_idx[b]]);
        p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1]))
    });
    // merge masses of coincident sites
    let mut sites: Vec<usize> = Vec::new();
    let mut targets: Vec<f64> = Vec::new();
    for &k in &order {
        if let Some(pos) = sites.iter().position(|&s| s == site_idx[k]) {
            targets[pos] += mu.masses[k];
        } else {
            sites.push(site_idx[k]);
            targets.push(mu.masses[k]);
        }
    }
    let n = pts.len();
    let mut is_boundary = vec![false; n];
    for v in mesh.boundary_vertices() {
        is_boundary[v] = true;
    }
    let mut z = vec![0.0; n];
    for v in mesh.boundary_vertices() {
        z[v] = problem.boundary[v];
    }
    let data: Vec<usize> = mesh.boundary_vertices().into_iter().chain(sites.iter().copied()).collect();
    // start from the homogeneous solution at the sites
    {
        let bpts: Vec<usize> = mesh.boundary_vertices();
        let bp: Vec<Point> = bpts.iter().map(|&v| pts[v]).collect();
        let bz: Vec<f64> = bpts.iter().map(|&v| z[v]).collect();
        let mut env = Envelope::build(&bp, &bz)?;
        let shift = match opts.init {
            Init::Default => 0.0,
            Init::Offset(o) => o,
        };
        for &s in &sites {
            z[s] = env.eval(pts[s])? - shift;
        }
    }
    let dist: Vec<f64> = sites.iter().map(|&s| mesh.boundary_distance(pts[s])).collect();
    let masses_now = |z: &[f64]| -> Vec<f64> {
        sites
            .iter()
            .zip(&dist)
            .map(|(&s, &d)| site_mass(&pts, z, &data, s, z[s], slope_radius(z, &data, z[s], d)))
            .collect()
    };
    let rel = |m: &[f64]| -> Vec<f64> { m.iter().zip(&targets).map(|(m, a)| (m - a).abs() / a).collect() };
    let mut iterations = 0;
    let mut res = rel(&masses_now(&z));
    while res.iter().cloned().fold(0.0, f64::max) > opts.tol {
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence {
                iterations,
                residual: res.iter().cloned().fold(0.0, f64::max),
            });
        }
        for (k, &s) in sites.iter().enumerate() {
            z[s] = match_site(&pts, &z, &data, s, targets[k], dist[k]);
        }
        iterations += 1;
        res = rel(&masses_now(&z));
        debug!("dirac sweep {iterations}: max residual {:e}", res.iter().cloned().fold(0.0, f64::max));
    }
    let mut free = vec![true; n];
    for &d in &data {
        free[d] = false;
    }
    let (u, _) = envelope_solution(&pts, &z, &free)?;
    let vm = u.vertex_masses();
    let masses: Vec<f64> = sites.iter().map(|&s| vm[s]).collect();
    let residual = rel(&masses);
    let scale = z.iter().map(|x| x.abs()).fold(1.0, f64::max);
    let mut warnings = domain_warnings(problem);
    warnings.extend(boundary_warnings(&u, problem, scale, Tolerances::default().bc));
    info!("dirac solve: {} sites, {iterations} sweeps", sites.len());
    Ok(AleksandrovSolution { u, sites, targets, masses, residual, iterations, warnings })
}

fn inside_hull(hull: &[Point], p: Point) -> bool {
    let n = hull.len();
    (0..n).all(|i| geom::orient2d(hull[i], hull[(i + 1) % n], p) > 0.0)
}

/// Barycentric dual-cell masses `Σ_T f_T |T| / 3` at every vertex.
pub fn dual_cell_targets(mesh: &Mesh, density: &[f64]) -> Vec<f64> {
    let mut a = vec![0.0; mesh.vertices().len()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let m = density[t] * mesh.triangle_area(t) / 3.0;
        for &v in tri {
            a[v] += m;
        }
    }
    a
}

/// `φ + μ(e^ρ − 1)` at the mesh vertices with the smallest `μ ≤ mu_cap` (up to bisection
/// accuracy) whose piecewise-linear interpolant passes the convexity certificate.
pub fn barrier(
    mesh: &Mesh,
    shape: &DomainShape,
    phi: impl Fn(Point) -> f64,
    mu_cap: f64,
    tol: &Tolerances,
) -> Result<(PlConvexFunction, f64)> {
    let base: Vec<f64> = mesh.vertices().iter().map(|&p| phi(p)).collect();
    let bump: Vec<f64> = mesh.vertices().iter().map(|&p| shape.rho(p).exp() - 1.0).collect();
    let make = |mu: f64| -> Result<PlFunction> {
        PlFunction::new(mesh.clone(), base.iter().zip(&bump).map(|(b, e)| b + mu * e).collect())
    };
    let ok = |f: &PlFunction| f.min_edge_jump().0 >= -tol.conv;
    let f0 = make(0.0)?;
    if ok(&f0) {
        return Ok((PlConvexFunction::from_pl(f0, tol.conv)?, 0.0));
    }
    let mut hi = 1.0;
    while !ok(&make(hi)?) {
        hi *= 2.0;
        if hi > mu_cap {
            return Err(Error::ConvexityCertificate(format!("no barrier coefficient up to {mu_cap}")));
        }
    }
    let mut lo = hi / 2.0;
    if hi == 1.0 {
        lo = 0.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ok(&make(mid)?) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((PlConvexFunction::from_pl(make(hi)?, tol.conv)?, hi))
}

struct MassState {
    masses: Vec<f64>,
    /// Triangles of the envelope and their gradients.
    mesh: Mesh,
    grads: Vec<Point>,
    all_active: bool,
}

fn mass_state(points: &[Point], z: &[f64], interior: &[usize]) -> Result<MassState> {
    let mut env = Envelope::build(points, z)?;
    let all_active = interior.iter().all(|&v| env.state()[v] == VertexState::Active);
    env.insert_all_passive()?;
    let mesh = Mesh::new(points.to_vec(), env.triangles())?;
    let h = env.heights();
    let grads: Vec<Point> = mesh
        .triangles()
        .iter()
        .map(|t| triangle_gradient(points[t[0]], points[t[1]], points[t[2]], h[t[0]], h[t[1]], h[t[2]]))
        .collect();
    let masses = interior
        .iter()
        .map(|&v| {
            let g: Vec<Point> = mesh.vertex_triangles(v).iter().map(|&t| grads[t]).collect();
            geom::polygon_area(&geom::convex_hull(&g)).max(0.0)
        })
        .collect();
    Ok(MassState { masses, mesh, grads, all_active })
}

/// Cell densities: damped Newton iteration on the interior vertex values. The Jacobian of
/// the vertex masses is a weighted graph Laplacian with weights |g_T − g_T'| / |x_i − x_j|
/// over the edges of the envelope triangulation.
pub fn solve_density(problem: &DirichletProblem, opts: &SolveOptions) -> Result<AleksandrovSolution> {
    let MeasureSpec::Density(f) = &problem.measure else {
        return Err(Error::InvalidArgument("expected a density".into()));
    };
    if let Some(t) = f.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Precondition(format!("density {} on triangle {t} is not positive", f[t])));
    }
    let mesh = &problem.mesh;
    let pts = mesh.vertices().to_vec();
    let interior = mesh.interior_vertices();
    let all_targets = dual_cell_targets(mesh, f);
    let targets: Vec<f64> = interior.iter().map(|&v| all_targets[v]).collect();
    let mut slot = vec![usize::MAX; pts.len()];
    for (k, &v) in interior.iter().enumerate() {
        slot[v] = k;
    }

    let hom = solve_homogeneous(&DirichletProblem { measure: MeasureSpec::Zero, ..problem.clone() })?;
    let base = hom.u.values().to_vec();
    let bump: Vec<f64> = pts.iter().map(|&p| problem.shape.rho(p).exp() - 1.0).collect();
    let make = |mu: f64| -> Vec<f64> {
        (0..pts.len())
            .map(|v| if slot[v] == usize::MAX { problem.boundary[v] } else { base[v] + mu * bump[v] })
            .collect()
    };
    // scale the barrier so that its total mass matches the target total
    let total: f64 = targets.iter().sum();
    let mut mu = 1.0;
    for _ in 0..8 {
        let m: f64 = mass_state(&pts, &make(mu), &interior)?.masses.iter().sum();
        if m <= 0.0 {
            mu *= 4.0;
            continue;
        }
        mu *= (total / m).sqrt();
    }
    if let Init::Offset(o) = opts.init {
        mu *= 1.0 + o;
    }
    let mut z = make(mu);
    let mut st = mass_state(&pts, &z, &interior)?;
    if !st.all_active {
        return Err(Error::ConvexityCertificate("barrier start is not strictly convex".into()));
    }
    let eps0 = 0.5 * targets.iter().chain(&st.masses).cloned().fold(f64::INFINITY, f64::min);
    let mismatch = |m: &[f64]| -> f64 { m.iter().zip(&targets).map(|(m, a)| (m - a).powi(2)).sum::<f64>().sqrt() };
    let rel = |m: &[f64]| -> Vec<f64> { m.iter().zip(&targets).map(|(m, a)| (m - a).abs() / a).collect() };
    let mut iterations = 0;
    loop {
        let res = rel(&st.masses);
        let worst = res.iter().cloned().fold(0.0, f64::max);
        debug!("newton {iterations}: max relative residual {worst:e}");
        if worst <= opts.tol {
            break;
        }
        if iterations >= opts.max_iter.min(500) {
            return Err(Error::NoConvergence { iterations, residual: worst });
        }
        let n = interior.len();
        let mut lap = CsrBuilder::new(n);
        let em = &st.mesh;
        for (t, tri) in em.triangles().iter().enumerate() {
            for (k, nb) in em.adjacency(t).iter().enumerate() {
                let Some(s) = *nb else { continue };
                if s < t {
                    continue;
                }
                let i = tri[(k + 1) % 3];
                let j = tri[(k + 2) % 3];
                let w = geom::dist(st.grads[t], st.grads[s]) / geom::dist(pts[i], pts[j]);
                let (si, sj) = (slot[i], slot[j]);
                if si != usize::MAX {
                    lap.add(si, si, w);
                }
                if sj != usize::MAX {
                    lap.add(sj, sj, w);
                }
                if si != usize::MAX && sj != usize::MAX {
                    lap.add(si, sj, -w);
                    lap.add(sj, si, -w);
                }
            }
        }
        let lap = lap.build();
        let rhs: Vec<f64> = st.masses.iter().zip(&targets).map(|(m, a)| m - a).collect();
        let mut delta = vec![0.0; n];
        lap.cg(&rhs, &mut delta, 1e-14, 0.0, 20 * n + 100)
            .or_else(|e| match e {
                Error::NoConvergence { residual, .. } if residual <= 1e-8 * mismatch(&st.masses) => {
                    Ok(crate::sparse::SolveStats { iterations: 0, residual })
                }
                e => Err(e),
            })?;
        let m0 = mismatch(&st.masses);
        let mut s = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = (0..pts.len())
                .map(|v| if slot[v] == usize::MAX { z[v] } else { z[v] + s * delta[slot[v]] })
                .collect();
            let ts = mass_state(&pts, &trial, &interior)?;
            let min_mass = ts.masses.iter().cloned().fold(f64::INFINITY, f64::min);
            if ts.all_active && min_mass >= eps0 && mismatch(&ts.masses) <= (1.0 - s / 2.0) * m0 {
                z = trial;
                st = ts;
                accepted = true;
                break;
            }
            s /= 2.0;
        }
        iterations += 1;
        if !accepted {
            let worst = rel(&st.masses).iter().cloned().fold(0.0, f64::max);
            return Err(Error::NoConvergence { iterations, residual: worst });
        }
    }
    let u = PlConvexFunction::new_unchecked(st.mesh.clone(), z)?;
    let residual = rel(&st.masses);
    let scale = u.values().iter().map(|x| x.abs()).fold(1.0, f64::max);
    let mut warnings = domain_warnings(problem);
    warnings.extend(boundary_warnings(&u, problem, scale, Tolerances::default().bc));
    info!("density solve: {} unknowns, {iterations} Newton steps", interior.len());
    Ok(AleksandrovSolution {
        u,
        sites: interior,
        targets,
        masses: st.masses,
        residual,
        iterations,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn disk_problem(rings: usize, g: impl Fn(Point) -> f64, measure: MeasureSpec) -> DirichletProblem {
        let mesh = Mesh::disk(1.0, rings, 6).unwrap();
        DirichletProblem::new(mesh, DomainShape::unit_disk(), g, measure).unwrap()
    }

    #[test]
    fn homogeneous_affine_and_constant() {
        let p = disk_problem(6, |x| 0.3 * x[0] - 2.0 * x[1] + 1.0, MeasureSpec::Zero);
        let s = solve_homogeneous(&p).unwrap();
        for (x, v) in s.u.mesh().vertices().iter().zip(s.u.values()) {
            assert!((v - (0.3 * x[0] - 2.0 * x[1] + 1.0)).abs() < 1e-12);
        }
        assert!(s.u.ma_measure_unchecked().total() < 1e-6);
        let p = disk_problem(6, |x| geom::dot(x, x) / 2.0, MeasureSpec::Zero);
        let s = solve_homogeneous(&p).unwrap();
        assert!(s.u.values().iter().all(|v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn homogeneous_matches_brute_force_planes() {
        let g = |x: Point| (2.0 * x[1].atan2(x[0])).cos();
        let p = disk_problem(7, g, MeasureSpec::Zero);
        let s = solve_homogeneous(&p).unwrap();
        let bv = p.mesh.boundary_vertices();
        let bp: Vec<[f64; 3]> = bv.iter().map(|&v| {
            let x = p.mesh.vertices()[v];
            [x[0], x[1], p.boundary[v]]
        }).collect();
        // supremum of planes through three data points lying below all data
        let mut planes = Vec::new();
        for a in 0..bp.len() {
            for b in a + 1..bp.len() {
                for c in b + 1..bp.len() {
                    let (pa, pb, pc) = (bp[a], bp[b], bp[c]);
                    let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
                    if det.abs() < 1e-9 {
                        continue;
                    }
                    let gx = ((pb[2] - pa[2]) * (pc[1] - pa[1]) - (pc[2] - pa[2]) * (pb[1] - pa[1])) / det;
                    let gy = ((pb[0] - pa[0]) * (pc[2] - pa[2]) - (pc[0] - pa[0]) * (pb[2] - pa[2])) / det;
                    let c0 = pa[2] - gx * pa[0] - gy * pa[1];
                    if bp.iter().all(|q| gx * q[0] + gy * q[1] + c0 <= q[2] + 1e-10) {
                        planes.push((gx, gy, c0));
                    }
                }
            }
        }
        for v in p.mesh.interior_vertices() {
            let x = p.mesh.vertices()[v];
            let best = planes.iter().map(|(a, b, c)| a * x[0] + b * x[1] + c).fold(f64::NEG_INFINITY, f64::max);
            assert!((s.u.values()[v] - best).abs() < 1e-9, "{} vs {best}", s.u.values()[v]);
        }
        for &v in &bv {
            assert!((s.u.values()[v] - p.boundary[v]).abs() < 1e-12);
        }
        assert!(s.u.ma_measure_unchecked().total() <= 1e-6);
    }

    #[test]
    fn single_dirac_is_discrete_cone() {
        for rings in [8, 16] {
            let m = 1.0;
            let mu = DiscreteMeasure::new(vec![[0.0, 0.0]], vec![m]).unwrap();
            let p = disk_problem(rings, |_| 0.0, MeasureSpec::Dirac(mu));
            let s = solve_dirac(&p, &SolveOptions::default()).unwrap();
            let nb = p.mesh.boundary_vertices().len() as f64;
            let ah = (m / (nb * (PI / nb).tan())).sqrt();
            assert!((s.u.values()[0] + ah).abs() < 1e-12 * ah, "{} vs {}", s.u.values()[0], -ah);
            let a = (m / PI).sqrt();
            let h = p.mesh.h_max();
            let err = p.mesh.vertices().iter().zip(s.u.values())
                .map(|(x, v)| (v - a * (geom::norm(*x) - 1.0)).abs())
                .fold(0.0, f64::max);
            assert!(err <= 5.0 * h, "err {err} h {h}");
            assert!(s.max_residual() <= 1e-6);
            let vm = s.u.vertex_masses();
            let stray: f64 = vm.iter().enumerate().filter(|(v, _)| *v != 0).map(|(_, m)| *m).sum();
            assert!(stray <= 1e-6);
        }
    }

    #[test]
    fn symmetric_pair_and_perron_monotonicity() {
        let mu = |m: f64| DiscreteMeasure::new(vec![[-0.4, 0.1], [0.4, 0.1]], vec![m, m]).unwrap();
        let mesh = Mesh::spoke_disk(1.0, 32, 8).unwrap();
        let p = DirichletProblem::new(mesh, DomainShape::unit_disk(), |_| 0.0, MeasureSpec::Dirac(mu(0.5))).unwrap();
        let s = solve_dirac(&p, &SolveOptions::default()).unwrap();
        let probe = [[0.1, 0.3], [-0.2, -0.5], [0.6, 0.0], [0.0, 0.7]];
        for q in probe {
            let a = s.u.eval(q).unwrap();
            let b = s.u.eval([-q[0], q[1]]).unwrap();
            assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
        }
        let heavier = DiscreteMeasure::new(vec![[-0.4, 0.1], [0.4, 0.1]], vec![0.8, 0.5]).unwrap();
        let p2 = DirichletProblem { measure: MeasureSpec::Dirac(heavier), ..p.clone() };
        let s2 = solve_dirac(&p2, &SolveOptions::default()).unwrap();
        assert!(s2.u.values().iter().zip(s.u.values()).all(|(a, b)| *a <= b + 1e-12));
    }

    #[test]
    fn small_mass_tends_to_homogeneous() {
        let g = |x: Point| 0.3 * (2.0 * x[1].atan2(x[0])).cos();
        let hom = solve_homogeneous(&disk_problem(8, g, MeasureSpec::Zero)).unwrap();
        let mut last = f64::INFINITY;
        for m in [1.0, 0.1, 0.01] {
            let mu = DiscreteMeasure::new(vec![[0.1, -0.2]], vec![m]).unwrap();
            let s = solve_dirac(&disk_problem(8, g, MeasureSpec::Dirac(mu)), &SolveOptions::default()).unwrap();
            let d = s.u.values().iter().zip(hom.u.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(d < last);
            last = d;
        }
    }

    #[test]
    fn dirac_uniqueness_from_two_starts() {
        let mu = DiscreteMeasure::new(vec![[-0.3, 0.2], [0.35, -0.1], [0.0, 0.5]], vec![0.4, 0.7, 0.2]).unwrap();
        let p = disk_problem(8, |x| x[0] * x[0], MeasureSpec::Dirac(mu));
        let a = solve_dirac(&p, &SolveOptions::default()).unwrap();
        let b = solve_dirac(&p, &SolveOptions { init: Init::Offset(2.0), ..Default::default() }).unwrap();
        let d = a.u.values().iter().zip(b.u.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(d <= 2e-6, "{d}");
    }

    #[test]
    fn density_quadratic_on_square_is_exact() {
        let mesh = Mesh::square_grid(12, 0.0, 1.0).unwrap();
        let nt = mesh.triangles().len();
        let shape = DomainShape::Polygon { domain: ConvexDomain::rectangle([0.0, 0.0], [1.0, 1.0]) };
        let p = DirichletProblem::new(mesh, shape, |x| geom::dot(x, x) / 2.0, MeasureSpec::Density(vec![1.0; nt])).unwrap();
        let s = solve_density(&p, &SolveOptions { tol: 1e-13, ..Default::default() }).unwrap();
        let err = s.u.mesh().vertices().iter().zip(s.u.values())
            .map(|(x, v)| (v - geom::dot(*x, *x) / 2.0).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
        assert!(!s.warnings.is_empty());
    }

    #[test]
    fn density_on_disk_converges() {
        let mut errs = Vec::new();
        for rings in [6, 12] {
            let mesh = Mesh::disk(1.0, rings, 6).unwrap();
            let nt = mesh.triangles().len();
            let p = DirichletProblem::new(mesh, DomainShape::unit_disk(), |_| 0.0, MeasureSpec::Density(vec![4.0; nt])).unwrap();
            let s = solve_density(&p, &SolveOptions::default()).unwrap();
            let err = s.u.mesh().vertices().iter().zip(s.u.values())
                .map(|(x, v)| (v - (geom::dot(*x, *x) - 1.0)).abs())
                .fold(0.0, f64::max);
            errs.push((p.mesh.h_max(), err));
        }
        eprintln!("{errs:?}");
        assert!(errs[1].1 < errs[0].1);
    }

    #[test]
    fn barrier_examples() {
        let mesh = Mesh::disk(1.0, 6, 6).unwrap();
        let tol = Tolerances::default();
        let shape = DomainShape::unit_disk();
        let (_, mu) = barrier(&mesh, &shape, |x| geom::dot(x, x) / 2.0, 1e6, &tol).unwrap();
        assert_eq!(mu, 0.0);
        let (f, mu) = barrier(&mesh, &shape, |x| x[0] * x[0] - x[1] * x[1], 1e6, &tol).unwrap();
        assert!(mu > 0.0 && mu < 100.0);
        assert!(f.as_pl().min_edge_jump().0 >= -tol.conv);
    }
}
