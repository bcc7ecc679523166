//! Second boundary value problem `U^{ij} w_ij = f`, `w = G'(det D²u)`, `u = φ`, `w = ψ` on the
//! boundary, solved by continuation in `t` through the fixed-point map `Φ_t`.

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::convex::PlConvexFunction;
use crate::dirichlet::{self, DirichletProblem, DomainShape, MeasureSpec, SolveOptions};
use crate::error::{Error, Result};
use crate::geom::{self, ConvexDomain, Point};
use crate::grid::{GridFunction, NodeKind, NEIGHBORS8};
use crate::linma;
use crate::mesh::Mesh;
use crate::sym2::SymmetricMatrix2;
use crate::tol::Tolerances;

/// Admissible range for `w` along the continuation.
pub const W_RANGE: (f64, f64) = (1e-8, 1e8);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GKind {
    /// `(d^θ − 1)/θ`, `0 ≤ θ < 1/n`; `θ = 0` is `log d`.
    Power { theta: f64 },
    Log,
    /// `log d / log log(d + e^{e^{4n}})`
    LogLoglog,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GRepr", into = "GRepr")]
pub struct GFunction {
    kind: GKind,
    n: usize,
}

fn default_dim() -> usize {
    2
}

#[derive(Serialize, Deserialize)]
struct GRepr {
    #[serde(flatten)]
    kind: GKind,
    #[serde(default = "default_dim")]
    n: usize,
}

impl TryFrom<GRepr> for GFunction {
    type Error = Error;
    fn try_from(r: GRepr) -> Result<Self> {
        GFunction::new(r.kind, r.n)
    }
}

impl From<GFunction> for GRepr {
    fn from(g: GFunction) -> Self {
        GRepr { kind: g.kind, n: g.n }
    }
}

impl GFunction {
    /// Rejects `G` that is not strictly increasing and strictly concave on `[1e−3, 1e3]`.
    pub fn new(kind: GKind, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if let GKind::Power { theta } = kind {
            if !(theta.is_finite() && theta >= 0.0 && theta < 1.0 / n as f64) {
                return Err(Error::InvalidArgument(format!("power exponent {theta} outside [0, 1/{n})")));
            }
        }
        let g = GFunction { kind, n };
        for k in 0..=60 {
            let d = 10f64.powf(-3.0 + 0.1 * k as f64);
            if !(g.dg(d) > 0.0 && g.d2g(d) < 0.0) {
                return Err(Error::InvalidArgument(format!("G is not strictly increasing and concave at d = {d}")));
            }
        }
        Ok(g)
    }

    pub fn power(theta: f64, n: usize) -> Result<Self> {
        GFunction::new(GKind::Power { theta }, n)
    }

    pub fn kind(&self) -> GKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn is_log(&self) -> bool {
        matches!(self.kind, GKind::Log | GKind::Power { theta: 0.0 })
    }

    // (a, a', a'', M, M', M'') for G = a/M
    fn loglog_parts(&self, d: f64) -> [f64; 6] {
        let e = (4.0 * self.n as f64).exp();
        let tiny = (-e).exp();
        let l = e + (d * tiny).ln_1p();
        let l1 = tiny / (1.0 + d * tiny);
        let l2 = -l1 * l1;
        let m = l.ln();
        let m1 = l1 / l;
        let m2 = (l2 * l - l1 * l1) / (l * l);
        [d.ln(), 1.0 / d, -1.0 / (d * d), m, m1, m2]
    }

    pub fn g(&self, d: f64) -> f64 {
        match self.kind {
            _ if self.is_log() => d.ln(),
            GKind::Power { theta } => (d.powf(theta) - 1.0) / theta,
            GKind::LogLoglog => {
                let [a, _, _, m, _, _] = self.loglog_parts(d);
                a / m
            }
            GKind::Log => unreachable!(),
        }
    }

    pub fn dg(&self, d: f64) -> f64 {
        match self.kind {
            _ if self.is_log() => 1.0 / d,
            GKind::Power { theta } => d.powf(theta - 1.0),
            GKind::LogLoglog => {
                let [a, a1, _, m, m1, _] = self.loglog_parts(d);
                a1 / m - a * m1 / (m * m)
            }
            GKind::Log => unreachable!(),
        }
    }

    pub fn d2g(&self, d: f64) -> f64 {
        match self.kind {
            _ if self.is_log() => -1.0 / (d * d),
            GKind::Power { theta } => (theta - 1.0) * d.powf(theta - 2.0),
            GKind::LogLoglog => {
                let [a, a1, a2, m, m1, m2] = self.loglog_parts(d);
                a2 / m - 2.0 * a1 * m1 / (m * m) - a * m2 / (m * m) + 2.0 * a * m1 * m1 / (m * m * m)
            }
            GKind::Log => unreachable!(),
        }
    }

    /// `Θ = (G')^{-1}`.
    pub fn theta_inv(&self, w: f64) -> Result<f64> {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::AdmissibleRange(w));
        }
        let d = match self.kind {
            _ if self.is_log() => 1.0 / w,
            GKind::Power { theta } => w.powf(1.0 / (theta - 1.0)),
            GKind::LogLoglog => {
                // Newton on s = log d for log G'(e^s) = log w, kept inside a bisection bracket
                let f = |s: f64| self.dg(s.exp()).ln() - w.ln();
                let (mut lo, mut hi) = (-300.0, 300.0);
                let mut s = -w.ln();
                for _ in 0..200 {
                    let v = f(s);
                    if v > 0.0 {
                        lo = s;
                    } else {
                        hi = s;
                    }
                    let d = s.exp();
                    let slope = d * self.d2g(d) / self.dg(d);
                    let mut next = s - v / slope;
                    if !(next > lo && next < hi) {
                        next = 0.5 * (lo + hi);
                    }
                    if (next - s).abs() <= 1e-16 * s.abs().max(1.0) {
                        s = next;
                        break;
                    }
                    s = next;
                }
                s.exp()
            }
            GKind::Log => unreachable!(),
        };
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::AdmissibleRange(w));
        }
        Ok(d)
    }

    /// `w*(d) = G(d) − d G'(d)`.
    pub fn dual(&self, d: f64) -> f64 {
        if self.is_log() {
            return d.ln() - 1.0;
        }
        self.g(d) - d * self.dg(d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// Evaluation overflowed at the range edge.
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionVerdict {
    pub status: Status,
    /// `(d, value)` samples backing the verdict.
    pub witness: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub a1: ConditionVerdict,
    pub a2: ConditionVerdict,
    pub a3: ConditionVerdict,
}

impl ConditionReport {
    pub fn all_pass(&self) -> bool {
        [&self.a1, &self.a2, &self.a3].iter().all(|v| v.status == Status::Pass)
    }
}

fn growth_verdict(samples: Vec<(f64, f64)>, margin: f64) -> ConditionVerdict {
    if samples.iter().any(|s| !s.1.is_finite()) {
        return ConditionVerdict { status: Status::Inconclusive, witness: samples };
    }
    let increasing = samples.windows(2).all(|w| w[1].1 > w[0].1);
    let last = samples[samples.len() - 1].1;
    let mid = samples[samples.len() / 2 - 1].1;
    let status = if increasing && last > mid + margin { Status::Pass } else { Status::Fail };
    ConditionVerdict { status, witness: samples }
}

/// (A1) `w' + (1 − 1/n) w/d ≤ 0` on a log grid over `[1e−4, 1e4]`; (A2) growth of `w*(10^k)`;
/// (A3) growth of `d^{1−1/n} w(d)` at `d = 10^{−k}`, `k = 1..8`.
pub fn check_a1_a2_a3(g: &GFunction) -> ConditionReport {
    let n = g.n as f64;
    let mut worst = (0.0, f64::NEG_INFINITY);
    let mut finite = true;
    for k in 0..=80 {
        let d = 10f64.powf(-4.0 + 0.1 * k as f64);
        let (w, w1) = (g.dg(d), g.d2g(d));
        let v = w1 + (1.0 - 1.0 / n) * w / d;
        let scale = w1.abs() + (w / d).abs();
        if !v.is_finite() || !scale.is_finite() {
            finite = false;
            continue;
        }
        let rel = v / scale;
        if rel > worst.1 {
            worst = (d, rel);
        }
    }
    let a1 = ConditionVerdict {
        status: if !finite {
            Status::Inconclusive
        } else if worst.1 <= 1e-12 {
            Status::Pass
        } else {
            Status::Fail
        },
        witness: vec![worst],
    };
    let a2 = growth_verdict((1..=8).map(|k| (10f64.powi(k), g.dual(10f64.powi(k)))).collect(), 0.1);
    let a3 = growth_verdict(
        (1..=8)
            .map(|k| {
                let d = 10f64.powi(-k);
                (d, d.powf(1.0 - 1.0 / n) * g.dg(d))
            })
            .collect(),
        0.1,
    );
    ConditionReport { a1, a2, a3 }
}

/// Data fields given in closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarField {
    Constant { value: f64 },
    /// `½ xᵗ A x + b·x + c`
    Quadratic {
        a: [[f64; 2]; 2],
        #[serde(default)]
        b: Point,
        #[serde(default)]
        c: f64,
    },
}

impl ScalarField {
    pub fn half_square() -> Self {
        ScalarField::Quadratic { a: [[1.0, 0.0], [0.0, 1.0]], b: [0.0, 0.0], c: 0.0 }
    }

    pub fn eval(&self, x: Point) -> f64 {
        match self {
            ScalarField::Constant { value } => *value,
            ScalarField::Quadratic { a, b, c } => {
                0.5 * (a[0][0] * x[0] * x[0] + (a[0][1] + a[1][0]) * x[0] * x[1] + a[1][1] * x[1] * x[1]) + geom::dot(*b, x) + c
            }
        }
    }
}

/// Axis-aligned box carrying a uniform grid; the outer ring of nodes is the boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectDomain {
    pub lo: Point,
    pub hi: Point,
    pub cells: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub domain: RectDomain,
    pub f: ScalarField,
    pub phi: ScalarField,
    pub psi: ScalarField,
}

#[derive(Debug, Clone)]
pub struct SecondBvp {
    pub spec: ProblemSpec,
    pub g: GFunction,
    grid: GridFunction,
    mesh: Mesh,
    shape: DomainShape,
    f: GridFunction,
}

impl SecondBvp {
    pub fn new(spec: ProblemSpec, g: GFunction) -> Result<Self> {
        let RectDomain { lo, hi, cells } = spec.domain;
        if cells[0] < 4 || cells[1] < 4 {
            return Err(Error::InvalidArgument("need at least 4 cells per direction".into()));
        }
        let hx = (hi[0] - lo[0]) / cells[0] as f64;
        let hy = (hi[1] - lo[1]) / cells[1] as f64;
        if !(hx > 0.0 && hy > 0.0) || (hx - hy).abs() > 1e-12 * hx {
            return Err(Error::InvalidArgument("grid cells must be square".into()));
        }
        let dims = [cells[0] + 1, cells[1] + 1];
        let mask = (0..dims[0] * dims[1])
            .map(|k| {
                let (i, j) = (k % dims[0], k / dims[0]);
                if i == 0 || j == 0 || i == cells[0] || j == cells[1] {
                    NodeKind::Boundary
                } else {
                    NodeKind::Interior
                }
            })
            .collect();
        let grid = GridFunction::new(lo, hx, dims, mask, vec![0.0; dims[0] * dims[1]])?;
        let f = grid.with_values(|x| spec.f.eval(x));
        if f.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("f is not finite on the grid".into()));
        }
        let inf_psi = grid.boundary().iter().map(|&k| spec.psi.eval(grid.point(k))).fold(f64::INFINITY, f64::min);
        if !(inf_psi > 0.0) {
            return Err(Error::Precondition(format!("inf ψ = {inf_psi} must be positive")));
        }
        let mesh = Mesh::rect_grid(cells, lo, hi)?;
        let shape = DomainShape::Polygon { domain: ConvexDomain::rectangle(lo, hi) };
        Ok(SecondBvp { spec, g, grid, mesh, shape, f })
    }

    pub fn grid(&self) -> &GridFunction {
        &self.grid
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuationState {
    pub t: f64,
    pub u: GridFunction,
    pub w: GridFunction,
    pub sweeps: usize,
    pub ma_residual: f64,
    pub lin_residual: f64,
    pub fp_gap: f64,
    pub min_det: f64,
    pub max_det: f64,
    /// Interior nodes whose discrete Hessian is not positive semidefinite.
    pub non_psd: usize,
}

impl ContinuationState {
    pub fn initial(problem: &SecondBvp, w0: f64) -> Self {
        ContinuationState {
            t: 0.0,
            u: problem.grid.with_values(|x| problem.spec.phi.eval(x)),
            w: problem.grid.with_values(|_| w0),
            sweeps: 0,
            ma_residual: f64::NAN,
            lin_residual: f64::NAN,
            fp_gap: f64::INFINITY,
            min_det: f64::NAN,
            max_det: f64::NAN,
            non_psd: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinuationOptions {
    pub t_steps: usize,
    pub damping: f64,
    pub max_sweeps: usize,
    /// Relative mass tolerance of the Monge-Ampère stage.
    pub ma_tol: f64,
    /// Constant initial `w`.
    pub init_w: f64,
    pub tolerances: Tolerances,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions { t_steps: 11, damping: 0.5, max_sweeps: 200, ma_tol: 1e-12, init_w: 1.0, tolerances: Tolerances::default() }
    }
}

fn check_range(w: &GridFunction) -> Result<()> {
    for (k, &v) in w.values.iter().enumerate() {
        if w.mask[k] != NodeKind::Exterior && !(W_RANGE.0..=W_RANGE.1).contains(&v) {
            return Err(Error::AdmissibleRange(v));
        }
    }
    Ok(())
}

/// One application of `Φ_t` with damping `s`: solve `det D²u = Θ(w)`, `u = φ`; then
/// `U^{ij} (w_t)_ij = t f`, `w_t = tψ + 1 − t`; return `w + s(w_t − w)`.
pub fn phi_t_step(state: &ContinuationState, problem: &SecondBvp, t: f64, s: f64, opts: &ContinuationOptions) -> Result<ContinuationState> {
    let tol = &opts.tolerances;
    check_range(&state.w)?;
    let node_density = state.w.values.iter().map(|&w| problem.g.theta_inv(w)).collect::<Result<Vec<_>>>()?;
    let density = problem.mesh.triangles().iter().map(|&[a, b, c]| (node_density[a] + node_density[b] + node_density[c]) / 3.0).collect();
    let ma = DirichletProblem::new(problem.mesh.clone(), problem.shape.clone(), |x| problem.spec.phi.eval(x), MeasureSpec::Density(density))?;
    let sol = dirichlet::solve_density(&ma, &SolveOptions { tol: opts.ma_tol, ..SolveOptions::default() })?;
    let verts = sol.u.mesh().vertices();
    if verts.len() != problem.grid.len() || (0..verts.len()).any(|k| verts[k] != problem.grid.point(k)) {
        return Err(Error::MeshMismatch("solver mesh does not carry the grid nodes".into()));
    }
    let u = problem.grid.with_values(|_| 0.0);
    let u = GridFunction { values: sol.u.values().to_vec(), ..u };
    let hess = linma::discrete_hessian(&u);
    let non_psd = hess.iter().filter(|m| !m.is_psd(tol.psd)).count();
    let dets: Vec<f64> = hess.iter().map(SymmetricMatrix2::det).collect();
    let rhs = problem.f.with_values(|_| 0.0);
    let rhs = GridFunction { values: problem.f.values.iter().map(|v| t * v).collect(), ..rhs };
    let bc = problem.grid.with_values(|x| t * problem.spec.psi.eval(x) + 1.0 - t);
    let lin = linma::solve_linma(&u, &rhs, &bc, tol)?;
    let wt = lin.v;
    let gap = wt.max_abs_diff(&state.w, &[NodeKind::Interior, NodeKind::Boundary]);
    let mut w = state.w.clone();
    for k in 0..w.len() {
        w.values[k] += s * (wt.values[k] - w.values[k]);
    }
    if let Some(&bad) = w.values.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::AdmissibleRange(bad));
    }
    Ok(ContinuationState {
        t,
        u,
        w,
        sweeps: state.sweeps + 1,
        ma_residual: sol.max_residual(),
        lin_residual: lin.residual_norm,
        fp_gap: gap,
        min_det: dets.iter().cloned().fold(f64::INFINITY, f64::min),
        max_det: dets.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        non_psd,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathRow {
    pub t: f64,
    pub sweeps: usize,
    pub ma_residual: f64,
    pub lin_residual: f64,
    pub fp_gap: f64,
    pub min_det: f64,
    pub max_det: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuationOutcome {
    pub state: ContinuationState,
    pub path: Vec<PathRow>,
    pub conditions: ConditionReport,
    pub warnings: Vec<String>,
}

enum Attempt {
    Done(ContinuationState),
    Stalled(Vec<f64>),
}

fn iterate_at(t: f64, start: &ContinuationState, problem: &SecondBvp, opts: &ContinuationOptions) -> Result<Attempt> {
    let mut s = opts.damping;
    let mut cur = ContinuationState { sweeps: 0, ..start.clone() };
    let mut gaps = Vec::new();
    while cur.sweeps < opts.max_sweeps {
        let next = match phi_t_step(&cur, problem, t, s, opts) {
            Ok(n) => n,
            Err(e @ (Error::NoConvergence { .. } | Error::AdmissibleRange(_) | Error::DegenerateHessian(_))) => {
                warn!("t = {t}: inner solve failed: {e}");
                return Ok(Attempt::Stalled(gaps));
            }
            Err(e) => return Err(e),
        };
        if gaps.last().is_some_and(|&g| next.fp_gap > g) {
            s = (0.5 * s).max(1.0 / 64.0);
        }
        gaps.push(next.fp_gap);
        debug!("t = {t}: sweep {} gap {:e}", next.sweeps, next.fp_gap);
        cur = next;
        if cur.fp_gap <= opts.tolerances.fp {
            return Ok(Attempt::Done(cur));
        }
    }
    Ok(Attempt::Stalled(gaps))
}

/// March `t` over a uniform schedule from 0 to 1, halving a step whose fixed-point iteration stalls.
pub fn continuation_solve(problem: &SecondBvp, opts: &ContinuationOptions) -> Result<ContinuationOutcome> {
    let conditions = check_a1_a2_a3(&problem.g);
    let mut warnings = Vec::new();
    for (name, v) in [("A1", &conditions.a1), ("A2", &conditions.a2), ("A3", &conditions.a3)] {
        if v.status != Status::Pass {
            warn!("condition {name} does not pass: {:?}", v.status);
            warnings.push(format!("condition {name}: {:?}", v.status));
        }
    }
    let base = 1.0 / (opts.t_steps.max(2) - 1) as f64;
    let mut step = base;
    let mut state = ContinuationState::initial(problem, opts.init_w);
    let mut reached: Option<f64> = None;
    let mut path = Vec::new();
    let mut history = Vec::new();
    loop {
        let t = match reached {
            None => 0.0,
            Some(r) if r + step >= 1.0 - 1e-12 => 1.0,
            Some(r) => r + step,
        };
        match iterate_at(t, &state, problem, opts)? {
            Attempt::Done(st) => {
                info!("t = {t}: converged in {} sweeps", st.sweeps);
                path.push(PathRow {
                    t,
                    sweeps: st.sweeps,
                    ma_residual: st.ma_residual,
                    lin_residual: st.lin_residual,
                    fp_gap: st.fp_gap,
                    min_det: st.min_det,
                    max_det: st.max_det,
                });
                if !(st.min_det > 0.0) {
                    return Err(Error::Stall { t, history: vec![st.min_det] });
                }
                state = st;
                reached = Some(t);
                if t >= 1.0 {
                    break;
                }
            }
            Attempt::Stalled(gaps) => {
                history.extend(gaps);
                step *= 0.5;
                if reached.is_none() || step < base / 64.0 {
                    return Err(Error::Stall { t: reached.unwrap_or(0.0), history });
                }
                warn!("halving the continuation step to {step}");
            }
        }
    }
    Ok(ContinuationOutcome { state, path, conditions, warnings })
}

#[derive(Debug, Clone, Serialize)]
pub struct FourthOrderResidual {
    /// `U^{ij} w_ij` with `w = G'(det D²u)`, at `nodes`.
    pub l: GridFunction,
    /// Interior nodes whose eight neighbors are interior.
    pub nodes: Vec<usize>,
    /// `−L[u]/(n+1)` when `θ = 1/(n+2)`.
    pub affine_curvature: Option<GridFunction>,
}

fn deep_nodes(u: &GridFunction) -> Vec<usize> {
    u.interior()
        .into_iter()
        .filter(|&k| {
            let (i, j) = u.ij(k);
            NEIGHBORS8.iter().all(|&(di, dj)| u.index(i as isize + di, j as isize + dj).is_some_and(|m| u.mask[m] == NodeKind::Interior))
        })
        .collect()
}

pub fn fourth_order_residual(u: &GridFunction, g: &GFunction) -> Result<FourthOrderResidual> {
    let mut w = u.with_values(|_| 0.0);
    let mut cof = vec![SymmetricMatrix2::default(); u.len()];
    let mut bad = 0;
    for k in u.interior() {
        let hsn = linma::hessian_at(u, k);
        let d = hsn.det();
        if !(d > 0.0) {
            bad += 1;
            continue;
        }
        w.values[k] = g.dg(d);
        cof[k] = hsn.cofactor();
    }
    if bad > 0 {
        return Err(Error::DegenerateHessian(bad));
    }
    let nodes = deep_nodes(u);
    let mut l = u.with_values(|_| 0.0);
    for &k in &nodes {
        l.values[k] = linma::stencil(&cof[k], u.h).iter().map(|&((di, dj), c)| c * w.at(k, di, dj)).sum();
    }
    let affine = matches!(g.kind, GKind::Power { theta } if (theta - 1.0 / (g.n as f64 + 2.0)).abs() < 1e-15);
    let affine_curvature = affine.then(|| {
        let mut hc = l.clone();
        hc.values.iter_mut().for_each(|v| *v /= -(g.n as f64 + 1.0));
        hc
    });
    Ok(FourthOrderResidual { l, nodes, affine_curvature })
}

#[derive(Debug, Clone, Serialize)]
pub struct DualReport {
    /// `U*^{ij} w*_ij + f(Du*) det D²u*` on the image grid.
    pub residual: GridFunction,
    pub nodes: Vec<usize>,
    pub max_residual: f64,
}

/// Residual of the dual equation for the Legendre transform of the PL interpolant of `u`, sampled
/// on a grid of `cells²` cells inside the gradient image.
pub fn dual_equation_residual(u: &GridFunction, g: &GFunction, f: &dyn Fn(Point) -> f64, cells: usize) -> Result<DualReport> {
    if u.mask.contains(&NodeKind::Exterior) {
        return Err(Error::InvalidArgument("dual residual needs a full rectangular grid".into()));
    }
    let slope = |k: usize| [(u.at(k, 1, 0) - u.at(k, -1, 0)) / (2.0 * u.h), (u.at(k, 0, 1) - u.at(k, 0, -1)) / (2.0 * u.h)];
    let interior = u.interior();
    let mut grads = vec![[0.0; 2]; u.len()];
    for &k in &interior {
        grads[k] = slope(k);
    }
    for &k in &interior {
        let (i, j) = u.ij(k);
        for (di, dj) in [(1, 0), (0, 1)] {
            let Some(m) = u.index(i as isize + di, j as isize + dj) else { continue };
            if u.mask[m] == NodeKind::Interior && geom::dot(geom::sub(grads[m], grads[k]), geom::sub(u.point(m), u.point(k))) <= 0.0 {
                return Err(Error::Precondition("gradient map is not injective".into()));
            }
        }
    }
    let pts: Vec<Point> = (0..u.len()).map(|k| u.point(k)).collect();
    let (pl, contact) = PlConvexFunction::envelope_with_contact(&pts, &u.values)?;
    if contact.contains(&false) {
        return Err(Error::ConvexityCertificate("grid values are not strictly convex".into()));
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for &k in &interior {
        for a in 0..2 {
            lo[a] = lo[a].min(grads[k][a]);
            hi[a] = hi[a].max(grads[k][a]);
        }
    }
    let mid = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    let half = 0.25 * (hi[0] - lo[0]).min(hi[1] - lo[1]);
    let cells = cells.max(4);
    // image spacing is a multiple of the grid spacing, with nodes on the lattice of u
    let m = ((2.0 * half / cells as f64) / u.h).floor().max(1.0);
    let hy = m * u.h;
    let origin = [((mid[0] - half) / u.h).round() * u.h, ((mid[1] - half) / u.h).round() * u.h];
    let dims = [cells + 1, cells + 1];
    let mask = (0..dims[0] * dims[1])
        .map(|k| {
            let (i, j) = (k % dims[0], k / dims[0]);
            if i == 0 || j == 0 || i == cells || j == cells {
                NodeKind::Boundary
            } else {
                NodeKind::Interior
            }
        })
        .collect();
    let star = GridFunction::new(origin, hy, dims, mask, vec![0.0; dims[0] * dims[1]])?;
    let star = star.with_values(|y| pl.legendre_value(y));
    let mut wstar = star.with_values(|_| 0.0);
    let mut cof = vec![SymmetricMatrix2::default(); star.len()];
    let mut dstar = vec![0.0; star.len()];
    for k in star.interior() {
        let hsn = linma::hessian_at(&star, k);
        let d = hsn.det();
        if !(d > 0.0) {
            return Err(Error::DegenerateHessian(1));
        }
        dstar[k] = d;
        wstar.values[k] = g.dual(1.0 / d);
        cof[k] = hsn.cofactor();
    }
    let nodes = deep_nodes(&star);
    let mut residual = star.with_values(|_| 0.0);
    for &k in &nodes {
        let lw: f64 = linma::stencil(&cof[k], hy).iter().map(|&((di, dj), c)| c * wstar.at(k, di, dj)).sum();
        let x = [(star.at(k, 1, 0) - star.at(k, -1, 0)) / (2.0 * hy), (star.at(k, 0, 1) - star.at(k, 0, -1)) / (2.0 * hy)];
        residual.values[k] = lw + f(x) * dstar[k];
    }
    let max_residual = nodes.iter().map(|&k| residual.values[k].abs()).fold(0.0, f64::max);
    Ok(DualReport { residual, nodes, max_residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_problem(cells: usize, f: f64, g: GFunction) -> SecondBvp {
        let spec = ProblemSpec {
            domain: RectDomain { lo: [-1.0, -1.0], hi: [1.0, 1.0], cells: [cells, cells] },
            f: ScalarField::Constant { value: f },
            phi: ScalarField::half_square(),
            psi: ScalarField::Constant { value: g.dg(1.0) },
        };
        SecondBvp::new(spec, g).unwrap()
    }

    #[test]
    fn g_family_derivatives_and_inverse() {
        for g in [GFunction::power(0.25, 2).unwrap(), GFunction::new(GKind::Log, 2).unwrap(), GFunction::new(GKind::LogLoglog, 2).unwrap()] {
            for k in 0..=12 {
                let d = 10f64.powf(-3.0 + 0.5 * k as f64);
                let e = 1e-5 * d;
                let fd1 = (g.g(d + e) - g.g(d - e)) / (2.0 * e);
                let fd2 = (g.dg(d + e) - g.dg(d - e)) / (2.0 * e);
                assert!((fd1 - g.dg(d)).abs() < 1e-6 * g.dg(d).abs(), "{g:?} {d}");
                assert!((fd2 - g.d2g(d)).abs() < 1e-5 * g.d2g(d).abs(), "{g:?} {d}");
                let back = g.theta_inv(g.dg(d)).unwrap();
                assert!((back - d).abs() <= 1e-12 * d, "{g:?} {d} {back}");
            }
        }
    }

    #[test]
    fn constructor_rejects_linear_and_large_theta() {
        assert!(GFunction::power(1.0, 2).is_err());
        assert!(GFunction::power(0.5, 2).is_err());
        assert!(GFunction::power(0.49, 2).is_ok());
    }

    #[test]
    fn conditions_for_the_family() {
        let affine = GFunction::power(0.25, 2).unwrap();
        assert!(check_a1_a2_a3(&affine).all_pass());
        let log = GFunction::new(GKind::Log, 2).unwrap();
        assert!(check_a1_a2_a3(&log).all_pass());
        assert!(check_a1_a2_a3(&GFunction::new(GKind::LogLoglog, 2).unwrap()).all_pass());
        for d in [0.5, 1.0, 2.0] {
            assert_eq!(log.dual(d), f64::ln(d) - 1.0);
        }
    }

    #[test]
    fn json_forms() {
        let g: GFunction = serde_json::from_str(r#"{"kind":"power","theta":0.25}"#).unwrap();
        assert_eq!(g, GFunction::power(0.25, 2).unwrap());
        assert!(serde_json::from_str::<GFunction>(r#"{"kind":"power","theta":0.75}"#).is_err());
        let f: ScalarField = serde_json::from_str(r#"{"kind":"quadratic","a":[[1,0],[0,1]]}"#).unwrap();
        assert_eq!(f.eval([1.0, 2.0]), 2.5);
    }

    #[test]
    fn quadratic_fixed_point_is_exact() {
        let g = GFunction::power(0.25, 2).unwrap();
        let p = square_problem(16, 0.0, g);
        let out = continuation_solve(&p, &ContinuationOptions::default()).unwrap();
        let exact = p.grid().with_values(|x| geom::dot(x, x) / 2.0);
        assert!(out.state.u.max_abs_diff(&exact, &[NodeKind::Interior]) < 1e-10);
        assert!(out.state.w.values.iter().all(|w| (w - 1.0).abs() < 1e-9));
        assert_eq!(out.path.len(), 11);
        let r = fourth_order_residual(&out.state.u, &g).unwrap();
        assert!(r.nodes.iter().all(|&k| r.l.values[k].abs() < 1e-8));
        assert!(r.affine_curvature.is_some());
        // one more step from the fixed point stays put
        let again = phi_t_step(&out.state, &p, 1.0, 1.0, &ContinuationOptions::default()).unwrap();
        assert!(again.fp_gap < 10.0 * Tolerances::default().lin.max(1e-9));
    }

    #[test]
    fn zero_t_maps_to_one() {
        let g = GFunction::power(0.25, 2).unwrap();
        let p = square_problem(8, 0.5, g);
        let mut st = ContinuationState::initial(&p, 2.0);
        let opts = ContinuationOptions::default();
        st = phi_t_step(&st, &p, 0.0, 1.0, &opts).unwrap();
        assert!(st.w.values.iter().all(|w| (w - 1.0).abs() < 1e-9));
    }

    #[test]
    fn small_forcing_converges_and_is_unique() {
        let g = GFunction::power(0.25, 2).unwrap();
        let p = square_problem(12, 0.1, g);
        let a = continuation_solve(&p, &ContinuationOptions::default()).unwrap();
        let b = continuation_solve(&p, &ContinuationOptions { init_w: 1.5, ..Default::default() }).unwrap();
        assert!(a.state.w.max_abs_diff(&b.state.w, &[NodeKind::Interior]) <= 2e-8);
        assert!(a.state.min_det > 0.0 && a.path.iter().all(|r| r.fp_gap <= 1e-8));
    }

    #[test]
    fn dual_residual_on_quadratic() {
        let u = GridFunction::square(16, -1.0, 1.0, |x| geom::dot(x, x) / 2.0).unwrap();
        let g = GFunction::new(GKind::Log, 2).unwrap();
        let r = dual_equation_residual(&u, &g, &|_| 0.0, 8).unwrap();
        assert!(r.max_residual < 1e-9 && !r.nodes.is_empty(), "{}", r.max_residual);
        let flat = GridFunction::square(8, -1.0, 1.0, |x| x[0] * x[0]).unwrap();
        assert!(dual_equation_residual(&flat, &g, &|_| 0.0, 8).is_err());
    }

    #[test]
    fn forcing_residual_shrinks_under_refinement() {
        let g = GFunction::power(0.25, 2).unwrap();
        let errs: Vec<f64> = [8, 16]
            .iter()
            .map(|&cells| {
                let p = square_problem(cells, 0.1, g);
                let out = continuation_solve(&p, &ContinuationOptions::default()).unwrap();
                let r = fourth_order_residual(&out.state.u, &g).unwrap();
                r.nodes.iter().map(|&k| (r.l.values[k] - 0.1).abs()).fold(0.0, f64::max)
            })
            .collect();
        assert!(errs[1] < 0.75 * errs[0] && errs[0] < 1e-3, "{errs:?}");
    }
}
