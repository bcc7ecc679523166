//! `ampere`: run the numerical experiments and write CSV, JSON and SVG artifacts.
//!
//! Exit status is 0 when every check passes, 1 when a check fails and 2 on usage errors.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use ampere::{Point, Tolerances};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "ampere", version, about = "Convex analysis and Monge-Ampère experiments")]
struct Cli {
    /// JSON input for the subcommand (a PL function for ma-measure, a problem for solve-abreu).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Tolerance override, e.g. `--tol conv=1e-9`; repeatable.
    #[arg(long = "tol", global = true, value_name = "NAME=VAL")]
    tol: Vec<String>,
    /// Also render SVG pictures.
    #[arg(long, global = true)]
    svg: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Monge-Ampère measure of a piecewise-linear convex function.
    MaMeasure(MaMeasureArgs),
    /// Aleksandrov solution of a Dirichlet problem with Dirac, density or zero data.
    SolveMa(SolveMaArgs),
    /// Linearized Monge-Ampère equation on a grid.
    SolveLinma(SolveLinmaArgs),
    /// Second boundary value problem by continuation (problem from --config).
    SolveAbreu,
    /// Section sweep of an eccentric quadratic.
    Sections(SectionsArgs),
    /// John ellipses of convex polygons.
    John(JohnArgs),
    /// Harnack ratios for the eccentric example.
    Harnack(HarnackArgs),
    /// Matrix lemmas, exponent polynomial, conditions on G and the cofactor identity.
    LemmaSuite(LemmaArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PlExample {
    Cone,
    Paraboloid,
}

#[derive(Args, Debug)]
pub struct MaMeasureArgs {
    /// Built-in function, used when no --config is given.
    #[arg(long, value_enum, default_value = "cone")]
    pub example: PlExample,
    #[arg(long, default_value_t = 32)]
    pub rays: usize,
    #[arg(long, default_value_t = 8)]
    pub rings: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DomainArg {
    Disk,
    Square,
}

#[derive(Args, Debug)]
pub struct SolveMaArgs {
    /// Dirac masses as `x,y,m` triples separated by `;`.
    #[arg(long, value_parser = parse_diracs)]
    pub dirac: Option<Diracs>,
    /// Constant density, used when no Dirac masses are given.
    #[arg(long, conflicts_with = "dirac")]
    pub density: Option<f64>,
    #[arg(long, value_enum, default_value = "disk")]
    pub domain: DomainArg,
    /// Mesh resolution: rings of the disk mesh, or cells per half side of the square.
    #[arg(long, default_value_t = 12)]
    pub rings: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LinmaU {
    Quadratic,
    Exp,
    Eccentric,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LinmaBc {
    One,
    Linear,
    Eccentric,
}

#[derive(Args, Debug)]
pub struct SolveLinmaArgs {
    #[arg(long, value_enum, default_value = "eccentric")]
    pub u: LinmaU,
    #[arg(long, value_enum, default_value = "eccentric")]
    pub bc: LinmaBc,
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    /// Constant right-hand side.
    #[arg(long, default_value_t = 0.0)]
    pub rhs: f64,
    /// Grid cells per side of [-1, 1]².
    #[arg(long, default_value_t = 32)]
    pub n: usize,
}

#[derive(Args, Debug)]
pub struct SectionsArgs {
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    #[arg(long, value_parser = parse_point, default_value = "0,0")]
    pub center: Point,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2,0.4")]
    pub heights: Vec<f64>,
    /// Grid cells per side.
    #[arg(long, default_value_t = 400)]
    pub n: usize,
}

#[derive(Args, Debug)]
pub struct JohnArgs {
    /// Polygon vertices as `x,y` pairs separated by `;`.
    #[arg(long, value_parser = parse_polygon)]
    pub polygon: Option<Polygon>,
    /// Number of seeded random polygons, used when no polygon is given.
    #[arg(long, default_value_t = 50)]
    pub random: usize,
}

#[derive(Args, Debug)]
pub struct HarnackArgs {
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5")]
    pub t: Vec<f64>,
    /// Radius of the ball for the ball ratio.
    #[arg(long)]
    pub ball: Option<f64>,
    #[arg(long, default_value_t = 48)]
    pub resolution: usize,
}

#[derive(Args, Debug)]
pub struct LemmaArgs {
    /// Random PSD pairs per dimension.
    #[arg(long, default_value_t = 1000)]
    pub pairs: usize,
}

#[derive(Debug, Clone)]
pub struct Diracs(pub Vec<(Point, f64)>);

#[derive(Debug, Clone)]
pub struct Polygon(pub Vec<Point>);

fn numbers(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"))).collect()
}

fn parse_point(s: &str) -> Result<Point, String> {
    match numbers(s)?.as_slice() {
        [x, y] => Ok([*x, *y]),
        _ => Err(format!("expected x,y in {s:?}")),
    }
}

fn parse_diracs(s: &str) -> Result<Diracs, String> {
    s.split(';')
        .filter(|t| !t.trim().is_empty())
        .map(|t| match numbers(t)?.as_slice() {
            [x, y, m] => Ok(([*x, *y], *m)),
            _ => Err(format!("expected x,y,m in {t:?}")),
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Diracs)
}

fn parse_polygon(s: &str) -> Result<Polygon, String> {
    s.split(';').filter(|t| !t.trim().is_empty()).map(parse_point).collect::<Result<Vec<_>, _>>().map(Polygon)
}

pub struct Ctx {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub tol: Tolerances,
    pub svg: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("AMPERE_LOG", "warn")).init();
    let cli = Cli::parse();
    let mut tol = Tolerances::default();
    for kv in &cli.tol {
        let parsed = kv.split_once('=').and_then(|(k, v)| v.parse::<f64>().ok().map(|v| (k, v)));
        let Some((name, value)) = parsed else {
            eprintln!("error: --tol expects NAME=VALUE, got {kv:?}");
            return ExitCode::from(2);
        };
        if let Err(e) = tol.set(name, value) {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let ctx = Ctx { config: cli.config, out: cli.out, seed: cli.seed, tol, svg: cli.svg };
    match commands::run(&cli.command, &ctx).and_then(|r| r.finish()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
