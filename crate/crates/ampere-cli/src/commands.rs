use std::f64::consts::PI;

use ampere::abreu::{self, ContinuationOptions, GFunction, GKind, ProblemSpec, RectDomain, ScalarField, SecondBvp, Status};
use ampere::convex::{self, DiscreteMeasure, PlConvexFunction, PlRepr};
use ampere::dirichlet::{self, AleksandrovSolution, DirichletProblem, DomainShape, MeasureSpec, SolveOptions};
use ampere::geom::{self, ConvexDomain};
use ampere::grid::{GridFunction, NodeKind};
use ampere::harnack::{self, HarnackInput};
use ampere::io::{self, Table};
use ampere::mesh::Mesh;
use ampere::sections::{self, SectionSource};
use ampere::{john, lemmas, linma, Point};
use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::report::RunReport;
use crate::{Command, Ctx, DomainArg, HarnackArgs, JohnArgs, LemmaArgs, LinmaBc, LinmaU, MaMeasureArgs, PlExample, SectionsArgs, SolveLinmaArgs, SolveMaArgs};

pub fn run(cmd: &Command, ctx: &Ctx) -> Result<RunReport> {
    if ctx.config.is_some() && !matches!(cmd, Command::MaMeasure(_) | Command::SolveAbreu) {
        bail!("--config is only read by ma-measure and solve-abreu");
    }
    match cmd {
        Command::MaMeasure(a) => ma_measure(a, ctx),
        Command::SolveMa(a) => solve_ma(a, ctx),
        Command::SolveLinma(a) => solve_linma(a, ctx),
        Command::SolveAbreu => solve_abreu(ctx),
        Command::Sections(a) => sections_sweep(a, ctx),
        Command::John(a) => john_cmd(a, ctx),
        Command::Harnack(a) => harnack_cmd(a, ctx),
        Command::LemmaSuite(a) => lemma_suite(a, ctx),
    }
}

fn read_config(ctx: &Ctx) -> Result<Option<String>> {
    match &ctx.config {
        Some(p) => Ok(Some(std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?)),
        None => Ok(None),
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn ma_measure(a: &MaMeasureArgs, ctx: &Ctx) -> Result<RunReport> {
    let mut rep = RunReport::new("ma-measure", ctx.seed, &ctx.out)?;
    let (repr, example) = match read_config(ctx)? {
        Some(text) => (serde_json::from_str::<PlRepr>(&text).context("config is not a PL function")?, None),
        None => {
            let mesh = match a.example {
                PlExample::Cone => Mesh::spoke_disk(1.0, a.rays, a.rings)?,
                PlExample::Paraboloid => Mesh::square_grid(2 * a.rings, -1.0, 1.0)?,
            };
            let values = mesh
                .vertices()
                .iter()
                .map(|&p| match a.example {
                    PlExample::Cone => geom::norm(p),
                    PlExample::Paraboloid => geom::dot(p, p) / 2.0,
                })
                .collect();
            let repr = PlRepr { vertices: mesh.vertices().to_vec(), triangles: mesh.triangles().to_vec(), values };
            (repr, Some(a.example))
        }
    };
    let mesh = Mesh::new(repr.vertices, repr.triangles)?;
    let u = match PlConvexFunction::new(mesh, repr.values, ctx.tol.conv) {
        Ok(u) => u,
        Err(e) => {
            rep.failed("convexity certificate", &e);
            return Ok(rep);
        }
    };
    let mu = match u.ma_measure(ctx.tol.conv) {
        Ok(m) => m,
        Err(e) => {
            rep.failed("convexity certificate", &e);
            return Ok(rep);
        }
    };
    rep.check("convexity certificate", true, format!("total interior mass {:.6e}", mu.total()));
    rep.lap("measure");
    let masses = u.vertex_masses();
    let mesh = u.mesh();
    let mut t = Table::new(&["x", "y", "mass", "boundary"]);
    for (v, p) in mesh.vertices().iter().enumerate() {
        t.push(vec![p[0], p[1], masses[v], flag(mesh.is_boundary(v))])?;
    }
    rep.csv("masses.csv", &t)?;
    match example {
        Some(PlExample::Cone) => {
            let degree = mesh.vertex_triangles(0).len();
            let rel = (masses[0] - PI).abs() / PI;
            rep.check("apex mass equals |B₁|", rel <= 0.02, format!("apex degree {degree}, mass {:.6}, relative error {rel:.2e}", masses[0]));
        }
        Some(PlExample::Paraboloid) => {
            let h = 1.0 / a.rings as f64;
            let worst = mesh.interior_vertices().iter().map(|&v| (masses[v] - h * h).abs() / (h * h)).fold(0.0, f64::max);
            rep.check("unit-density cells", worst <= 1e-12, format!("largest relative deviation from h² {worst:.2e}"));
        }
        None => rep.skip("closed form", "no oracle for an input function"),
    }
    if ctx.svg {
        let polys: Vec<Vec<Point>> = mesh.interior_vertices().iter().filter_map(|&v| u.subdifferential(v).ok()).map(|s| s.slopes).filter(|s| s.len() >= 3).collect();
        rep.svg("subdifferentials.svg", io::polygons_svg(&polys))?;
    }
    rep.lap("output");
    Ok(rep)
}

fn solve_ma(a: &SolveMaArgs, ctx: &Ctx) -> Result<RunReport> {
    let mut rep = RunReport::new("solve-ma", ctx.seed, &ctx.out)?;
    if a.rings < 2 {
        bail!("--rings must be at least 2");
    }
    let (mesh, shape) = match a.domain {
        DomainArg::Disk => (Mesh::disk(1.0, a.rings, 6)?, DomainShape::unit_disk()),
        DomainArg::Square => (Mesh::square_grid(2 * a.rings, -1.0, 1.0)?, DomainShape::Polygon { domain: ConvexDomain::square(1.0) }),
    };
    let nt = mesh.triangles().len();
    let measure = match (&a.dirac, a.density) {
        (Some(d), _) => {
            let (sites, masses) = d.0.iter().copied().unzip();
            MeasureSpec::Dirac(DiscreteMeasure::new(sites, masses)?)
        }
        (None, Some(c)) => MeasureSpec::Density(vec![c; nt]),
        (None, None) => MeasureSpec::Zero,
    };
    let problem = DirichletProblem::new(mesh, shape, |_| 0.0, measure)?;
    let opts = SolveOptions { tol: ctx.tol.solve, ..Default::default() };
    let solved = match &problem.measure {
        MeasureSpec::Dirac(_) => dirichlet::solve_dirac(&problem, &opts),
        MeasureSpec::Density(_) => dirichlet::solve_density(&problem, &opts),
        MeasureSpec::Zero => dirichlet::solve_homogeneous(&problem),
    };
    rep.lap("solve");
    let s = match solved {
        Ok(s) => s,
        Err(e) => {
            rep.failed("solve", &e);
            return Ok(rep);
        }
    };
    for w in &s.warnings {
        log::warn!("{w}");
    }
    rep.check("solve", true, format!("{} iterations", s.iterations));
    if s.sites.is_empty() {
        let m = s.u.ma_measure_unchecked().total();
        rep.check("zero interior mass", m <= ctx.tol.meas, format!("total {m:.2e}"));
    } else {
        let r = s.max_residual();
        rep.check("site masses", r <= ctx.tol.solve, format!("max relative residual {r:.2e}"));
    }
    max_principles(&mut rep, &s, &problem.shape, ctx);
    rep.json("solution.json", &s.u)?;
    let mesh = s.u.mesh();
    let mut t = Table::new(&["x", "y", "value", "boundary"]);
    for (v, p) in mesh.vertices().iter().enumerate() {
        t.push(vec![p[0], p[1], s.u.values()[v], flag(mesh.is_boundary(v))])?;
    }
    rep.csv("solution.csv", &t)?;
    let h = problem.mesh.h_max();
    let exact: Option<Box<dyn Fn(Point) -> f64>> = match (&problem.measure, a.domain) {
        (MeasureSpec::Dirac(mu), DomainArg::Disk) if mu.sites.len() == 1 && mu.sites[0] == [0.0, 0.0] => {
            let c = (mu.masses[0] / PI).sqrt();
            Some(Box::new(move |x: Point| c * (geom::norm(x) - 1.0)))
        }
        (MeasureSpec::Density(f), DomainArg::Disk) => {
            let c = f[0].sqrt();
            Some(Box::new(move |x: Point| c * (geom::dot(x, x) - 1.0) / 2.0))
        }
        (MeasureSpec::Zero, _) => Some(Box::new(|_| 0.0)),
        _ => None,
    };
    match exact {
        Some(f) => {
            let mut t = Table::new(&["x", "y", "value", "exact", "error"]);
            let mut worst = 0.0f64;
            for (p, v) in mesh.vertices().iter().zip(s.u.values()) {
                let e = f(*p);
                worst = worst.max((v - e).abs());
                t.push(vec![p[0], p[1], *v, e, (v - e).abs()])?;
            }
            rep.csv("error.csv", &t)?;
            rep.check("closed form", worst <= 5.0 * h, format!("max error {worst:.3e} against 5h = {:.3e}", 5.0 * h));
        }
        None => rep.skip("closed form", "no closed form for this data"),
    }
    rep.lap("output");
    Ok(rep)
}

fn max_principles(rep: &mut RunReport, s: &AleksandrovSolution, shape: &DomainShape, ctx: &Ctx) {
    match s.u.aleksandrov_bound(&ctx.tol) {
        Ok(r) => rep.check("Aleksandrov bound", r.pass, format!("{} interior vertices", r.rows.len())),
        Err(e) => rep.failed("Aleksandrov bound", &e),
    }
    let hom = DirichletProblem::new(s.u.mesh().clone(), shape.clone(), |_| 0.0, MeasureSpec::Zero).and_then(|p| dirichlet::solve_homogeneous(&p));
    match hom.and_then(|h| convex::comparison_check(&h.u, &s.u, &ctx.tol)) {
        Ok(c) => rep.check("comparison with the homogeneous solution", c.pass, format!("min gap {:.3e}", c.min_gap)),
        Err(e) => rep.failed("comparison with the homogeneous solution", &e),
    }
}

fn solve_linma(a: &SolveLinmaArgs, ctx: &Ctx) -> Result<RunReport> {
    let mut rep = RunReport::new("solve-linma", ctx.seed, &ctx.out)?;
    if a.n < 4 {
        bail!("--n must be at least 4");
    }
    if !(a.epsilon > 0.0) {
        bail!("--epsilon must be positive");
    }
    let eps = a.epsilon;
    let (u_ecc, v_ecc) = harnack::eccentric_pair(eps);
    let u: Box<dyn Fn(Point) -> f64> = match a.u {
        LinmaU::Quadratic => Box::new(|x| geom::dot(x, x) / 2.0),
        LinmaU::Exp => Box::new(|x| (geom::dot(x, x) / 2.0).exp()),
        LinmaU::Eccentric => Box::new(u_ecc),
    };
    let bc: Box<dyn Fn(Point) -> f64> = match a.bc {
        LinmaBc::One => Box::new(|_| 1.0),
        LinmaBc::Linear => Box::new(|x| x[0] + 2.0 * x[1]),
        LinmaBc::Eccentric => Box::new(v_ecc),
    };
    let ug = GridFunction::square(a.n, -1.0, 1.0, &u)?;
    let g = ug.with_values(|_| a.rhs);
    let b = ug.with_values(&bc);
    let solved = linma::solve_linma(&ug, &g, &b, &ctx.tol);
    rep.lap("solve");
    let s = match solved {
        Ok(s) => s,
        Err(e) => {
            rep.failed("solve", &e);
            return Ok(rep);
        }
    };
    rep.check("solve", true, format!("{} iterations, residual {:.2e}", s.iterations, s.residual_norm));
    rep.check("monotone stencil", s.m_matrix.monotone, format!("{} rows violate the M-matrix sign pattern", s.m_matrix.violating_rows));
    let cof = linma::cofactor_field(&ug, ctx.tol.psd);
    let rhs: Vec<f64> = ug.interior().iter().map(|&k| g.values[k]).collect();
    match linma::abp_check(&cof.cofactor, &s.v, &rhs, &ctx.tol) {
        Ok(r) => rep.check("ABP bound", r.pass, format!("sup {:.6} against {:.6} + {:.3e}", r.sup_interior, r.sup_boundary, r.forcing_term)),
        Err(e) => rep.failed("ABP bound", &e),
    }
    // the stencil is exact on quadratics, and the boundary data solve the homogeneous equation in these cases
    let exact = a.rhs == 0.0 && matches!((a.u, a.bc), (_, LinmaBc::One) | (_, LinmaBc::Linear) | (LinmaU::Eccentric, LinmaBc::Eccentric));
    if exact {
        let err = s.v.values.iter().enumerate().filter(|(k, _)| s.v.mask[*k] != NodeKind::Exterior).map(|(k, v)| (v - bc(s.v.point(k))).abs()).fold(0.0, f64::max);
        rep.check("closed form", err <= 1e-8, format!("max error {err:.2e}"));
    } else {
        rep.skip("closed form", "no closed form for this data");
    }
    rep.csv("v.csv", &Table::from(&s.v))?;
    if ctx.svg {
        rep.svg("v.svg", io::contour_svg(&s.v, 12))?;
    }
    rep.lap("output");
    Ok(rep)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AbreuConfig {
    #[serde(rename = "G")]
    g: GFunction,
    problem: ProblemSpec,
    #[serde(default)]
    t_steps: Option<usize>,
    #[serde(default)]
    damping: Option<f64>,
    #[serde(default)]
    max_sweeps: Option<usize>,
    #[serde(default)]
    tolerances: Option<ampere::Tolerances>,
}

fn default_abreu() -> AbreuConfig {
    let g = GFunction::power(0.25, 2).expect("valid exponent");
    AbreuConfig {
        problem: ProblemSpec {
            domain: RectDomain { lo: [-1.0, -1.0], hi: [1.0, 1.0], cells: [32, 32] },
            f: ScalarField::Constant { value: 0.0 },
            phi: ScalarField::half_square(),
            psi: ScalarField::Constant { value: g.dg(1.0) },
        },
        g,
        t_steps: None,
        damping: None,
        max_sweeps: None,
        tolerances: None,
    }
}

fn solve_abreu(ctx: &Ctx) -> Result<RunReport> {
    let mut rep = RunReport::new("solve-abreu", ctx.seed, &ctx.out)?;
    let cfg = match read_config(ctx)? {
        Some(text) => serde_json::from_str::<AbreuConfig>(&text).context("invalid solve-abreu config")?,
        None => default_abreu(),
    };
    let mut opts = ContinuationOptions { tolerances: cfg.tolerances.unwrap_or(ctx.tol), ..Default::default() };
    if let Some(t) = cfg.t_steps {
        opts.t_steps = t;
    }
    if let Some(d) = cfg.damping {
        opts.damping = d;
    }
    if let Some(m) = cfg.max_sweeps {
        opts.max_sweeps = m;
    }
    let g = cfg.g;
    let quadratic_case = cfg.problem.f == ScalarField::Constant { value: 0.0 }
        && cfg.problem.phi == ScalarField::half_square()
        && cfg.problem.psi == ScalarField::Constant { value: g.dg(1.0) };
    let f = cfg.problem.f.clone();
    let problem = SecondBvp::new(cfg.problem, g)?;
    let conditions = abreu::check_a1_a2_a3(&g);
    for (name, v) in [("condition A1", &conditions.a1), ("condition A2", &conditions.a2), ("condition A3", &conditions.a3)] {
        match v.status {
            Status::Pass => rep.check(name, true, format!("{} samples", v.witness.len())),
            Status::Fail => rep.check(name, false, format!("witness {:?}", v.witness.first())),
            Status::Inconclusive => rep.skip(name, "evaluation overflowed at the range edge"),
        }
    }
    let out = abreu::continuation_solve(&problem, &opts);
    rep.lap("continuation");
    let out = match out {
        Ok(o) => o,
        Err(e) => {
            rep.failed("continuation", &e);
            return Ok(rep);
        }
    };
    for w in &out.warnings {
        log::warn!("{w}");
    }
    let last = out.path.last().map_or(f64::NAN, |r| r.fp_gap);
    rep.check("continuation", last <= opts.tolerances.fp, format!("{} steps, final fixed-point gap {last:.2e}", out.path.len()));
    rep.check("positive Hessian determinant", out.state.min_det > 0.0, format!("min det {:.3e}", out.state.min_det));
    match abreu::fourth_order_residual(&out.state.u, &g) {
        Ok(r) => {
            let worst = r.nodes.iter().map(|&k| (r.l.values[k] - f.eval(out.state.u.point(k))).abs()).fold(0.0, f64::max);
            if quadratic_case {
                let exact = problem.grid().with_values(|x| geom::dot(x, x) / 2.0);
                let err = out.state.u.max_abs_diff(&exact, &[NodeKind::Interior, NodeKind::Boundary]);
                rep.check("quadratic exactness", err <= 1e-8 && worst <= 1e-8, format!("u error {err:.2e}, fourth-order residual {worst:.2e}"));
            } else {
                rep.skip("quadratic exactness", format!("not the quadratic problem; max |L(u) − f| = {worst:.3e}"));
            }
        }
        Err(e) => rep.failed("quadratic exactness", &e),
    }
    let mut path = Table::new(&["t", "sweeps", "ma_residual", "lin_residual", "fp_gap", "min_det", "max_det"]);
    for r in &out.path {
        path.push(vec![r.t, r.sweeps as f64, r.ma_residual, r.lin_residual, r.fp_gap, r.min_det, r.max_det])?;
    }
    rep.csv("path.csv", &path)?;
    rep.csv("u.csv", &Table::from(&out.state.u))?;
    rep.csv("w.csv", &Table::from(&out.state.w))?;
    if ctx.svg {
        rep.svg("u.svg", io::contour_svg(&out.state.u, 10))?;
    }
    rep.lap("output");
    Ok(rep)
}

fn sections_sweep(a: &SectionsArgs, ctx: &Ctx) -> Result<RunReport> {
    let mut rep = RunReport::new("sections", ctx.seed, &ctx.out)?;
    if !(a.epsilon > 0.0) || a.heights.iter().any(|h| !(*h > 0.0)) || a.heights.is_empty() {
        bail!("--epsilon and --heights must be positive");
    }
    let mut heights = a.heights.clone();
    heights.sort_by(f64::total_cmp);
    let eps = a.epsilon;
    let top = heights[heights.len() - 1];
    let reach = (2.0 * eps * top).sqrt().max((2.0 * top / eps).sqrt());
    let half = 1.25 * reach + a.center[0].abs().max(a.center[1].abs());
    let (u, _) = harnack::eccentric_pair(eps);
    let g = GridFunction::square(a.n, -half, half, u)?;
    let c = g.nearest_node(a.center);
    let sweep = sections::section_volume_sweep(&g, c, &heights, 1.0 + 1e-2)?;
    let secs = heights.iter().map(|&h| g.section(c, h)).collect::<ampere::Result<Vec<_>>>()?;
    rep.lap("sections");
    let mut t = Table::new(&["h", "volume", "ratio", "clipped"]);
    for r in &sweep.rows {
        t.push(vec![r.h, r.volume, r.ratio, flag(r.clipped)])?;
    }
    rep.csv("sections.csv", &t)?;
    let mut poly = Table::new(&["h", "vertex", "x", "y"]);
    for s in &secs {
        for (k, p) in s.boundary.iter().enumerate() {
            poly.push(vec![s.height, k as f64, p[0], p[1]])?;
        }
    }
    rep.csv("polygons.csv", &poly)?;
    let dev = sweep.rows.iter().map(|r| (r.ratio / (2.0 * PI) - 1.0).abs()).fold(0.0, f64::max);
    let clipped = sweep.rows.iter().any(|r| r.clipped);
    rep.check("volume law |S|/h = 2π", !clipped && dev <= 0.01, format!("max relative deviation {dev:.2e}"));
    let nested = secs.windows(2).all(|w| match ConvexDomain::new(w[1].boundary.clone(), ctx.tol.geom) {
        Ok(outer) => w[0].boundary.iter().all(|&p| outer.contains(p, ctx.tol.ineq)),
        Err(_) => false,
    });
    rep.check("sections are nested", nested, format!("{} heights", secs.len()));
    if ctx.svg {
        let polys: Vec<Vec<Point>> = secs.iter().rev().map(|s| s.boundary.clone()).collect();
        rep.svg("sections.svg", io::polygons_svg(&polys))?;
    }
    rep.lap("output");
    Ok(rep)
}

fn john_cmd(a: &JohnArgs, ctx: &Ctx) -> Result<RunReport> {
    let mut rep = RunReport::new("john", ctx.seed, &ctx.out)?;
    let polys: Vec<ConvexDomain> = match &a.polygon {
        Some(p) => vec![ConvexDomain::new(geom::convex_hull(&p.0), ctx.tol.geom).context("polygon")?],
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
            (0..a.random)
                .map(|_| {
                    let n = rng.gen_range(3..12);
                    john::random_polygon(&mut rng, n)
                })
                .collect()
        }
    };
    if polys.is_empty() {
        bail!("no polygons");
    }
    let mut t = Table::new(&["polygon", "cx", "cy", "a11", "a12", "a22", "area_ratio", "contained"]);
    let mut failures = 0;
    let mut pics = Vec::new();
    for (i, k) in polys.iter().enumerate() {
        let fit = john::john_ellipsoid(k, &ctx.tol).and_then(|e| john::check_containments(k, &e, &ctx.tol).map(|_| e));
        match fit {
            Ok(e) => {
                t.push(vec![i as f64, e.center[0], e.center[1], e.shape.a11, e.shape.a12, e.shape.a22, e.volume() / k.area(), 1.0])?;
                if pics.len() < 12 {
                    pics.push(k.vertices().to_vec());
                    pics.push(io::ellipse_polygon(e.center, e.root().as_rows(), 96));
                }
            }
            Err(err) => {
                log::warn!("polygon {i}: {err}");
                failures += 1;
                t.push(vec![i as f64, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN, 0.0])?;
            }
        }
    }
    rep.lap("ellipses");
    rep.check("E ⊂ K ⊂ c + 2(E − c)", failures == 0, format!("{failures} of {} polygons failing", polys.len()));
    rep.csv("ellipses.csv", &t)?;
    if ctx.svg {
        rep.svg("ellipses.svg", io::polygons_svg(&pics))?;
    }
    rep.lap("output");
    Ok(rep)
}

fn harnack_cmd(a: &HarnackArgs, ctx: &Ctx) -> Result<RunReport> {
    let mut rep = RunReport::new("harnack", ctx.seed, &ctx.out)?;
    if !(a.epsilon > 0.0) || a.t.iter().any(|t| !(*t > 0.0 && *t < 1.0)) || a.t.is_empty() {
        bail!("--epsilon must be positive and every --t must lie in (0, 1)");
    }
    let eps = a.epsilon;
    let (u, v) = harnack::eccentric_pair(eps);
    let mut t = Table::new(&["epsilon", "t", "sup", "inf", "ratio", "expected"]);
    let mut worst = 0.0f64;
    for &s in &a.t {
        let r = harnack::harnack_probe(&HarnackInput { u: &u, trace: &v, center: [0.0, 0.0], height: s, ball_radius: None, resolution: a.resolution }, &ctx.tol);
        match r {
            Ok(r) => {
                let expect = (s + 1.0) / (1.0 - s);
                worst = worst.max((r.section.ratio - expect).abs());
                t.push(vec![eps, s, r.section.sup, r.section.inf, r.section.ratio, expect])?;
            }
            Err(e) => {
                rep.failed("section ratio (t+1)/(1−t)", &e);
                return Ok(rep);
            }
        }
    }
    rep.lap("sections");
    rep.check("section ratio (t+1)/(1−t)", worst <= 1e-6, format!("max deviation {worst:.2e}"));
    rep.csv("harnack.csv", &t)?;
    match a.ball {
        Some(r) => {
            let h = 1.5 * r * r / (2.0 * eps);
            match harnack::harnack_probe(&HarnackInput { u: &u, trace: &v, center: [0.0, 0.0], height: h, ball_radius: Some(r), resolution: a.resolution }, &ctx.tol) {
                Ok(rp) => {
                    let b = rp.ball.expect("ball requested");
                    let mut bt = Table::new(&["epsilon", "radius", "sup", "inf", "ratio", "bound"]);
                    bt.push(vec![eps, r, b.sup, b.inf, b.ratio, 1.0 / (32.0 * eps)])?;
                    rep.csv("ball.csv", &bt)?;
                    rep.check("ball ratio exceeds 1/(32ε)", b.ratio > 1.0 / (32.0 * eps), format!("ratio {:.4} against {:.4}", b.ratio, 1.0 / (32.0 * eps)));
                }
                Err(e) => rep.failed("ball ratio exceeds 1/(32ε)", &e),
            }
        }
        None => rep.skip("ball ratio exceeds 1/(32ε)", "no --ball radius"),
    }
    rep.lap("ball");
    Ok(rep)
}

fn lemma_suite(a: &LemmaArgs, ctx: &Ctx) -> Result<RunReport> {
    let mut rep = RunReport::new("lemma-suite", ctx.seed, &ctx.out)?;
    let p = lemmas::exponent_polynomial(10.0, 4.5);
    rep.check("exponent polynomial vanishes at n = 10, α = 9/2", p == 0.0, format!("value {p}"));
    let roots = lemmas::exponent_roots(10.0);
    rep.check("double root at n = 10", roots == [4.5], format!("roots {roots:?}"));
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut sweep = Table::new(&["n", "pairs", "failures", "singular"]);
    for n in [2, 3] {
        let name = format!("matrix lemmas, n = {n}");
        match lemmas::random_sweep(&mut rng, a.pairs, n, ctx.tol.psd) {
            Ok(r) => {
                rep.check(&name, r.failures == 0, format!("{} of {} pairs failing", r.failures, r.pairs));
                sweep.push(vec![n as f64, r.pairs as f64, r.failures as f64, r.singular as f64])?;
            }
            Err(e) => rep.failed(&name, &e),
        }
    }
    rep.csv("matrix_lemmas.csv", &sweep)?;
    rep.lap("lemmas");
    let family = [("power θ = 1/4", GFunction::power(0.25, 2)?), ("log", GFunction::new(GKind::Log, 2)?), ("log/loglog", GFunction::new(GKind::LogLoglog, 2)?)];
    let mut cond = Table::new(&["g", "condition", "d", "value"]);
    for (i, (label, g)) in family.iter().enumerate() {
        let r = abreu::check_a1_a2_a3(g);
        for (j, v) in [&r.a1, &r.a2, &r.a3].into_iter().enumerate() {
            let name = format!("A{} for {label}", j + 1);
            match v.status {
                Status::Pass => rep.check(&name, true, format!("{} samples", v.witness.len())),
                Status::Fail => rep.check(&name, false, format!("witness {:?}", v.witness.first())),
                Status::Inconclusive => rep.skip(&name, "evaluation overflowed at the range edge"),
            }
            for &(d, val) in &v.witness {
                cond.push(vec![i as f64, (j + 1) as f64, d, val])?;
            }
        }
    }
    rep.csv("conditions.csv", &cond)?;
    let log = GFunction::new(GKind::Log, 2)?;
    let exact = [0.5, 1.0, 2.0].iter().all(|&d| log.dual(d) == d.ln() - 1.0);
    rep.check("log dual is ln d − 1", exact, "d ∈ {0.5, 1, 2}");
    rep.lap("conditions");
    let res = |n: usize| -> Result<f64> {
        let u = GridFunction::square(n, -1.0, 1.0, |x| (geom::dot(x, x) / 2.0).exp())?;
        Ok(linma::max_residual_within(&u, &linma::divergence_free_residual(&u), 0.5))
    };
    let (r16, r32) = (res(16)?, res(32)?);
    let ratio = r16 / r32;
    rep.check("cofactor divergence decays at order 2", (3.5..=4.5).contains(&ratio), format!("Richardson ratio {ratio:.4}"));
    let mut rt = Table::new(&["n", "residual"]);
    rt.push(vec![16.0, r16])?;
    rt.push(vec![32.0, r32])?;
    rep.csv("divergence.csv", &rt)?;
    rep.lap("cofactor");
    Ok(rep)
}
