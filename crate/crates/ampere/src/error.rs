use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("domain is not convex: {0}")]
    NotConvex(String),
    #[error("convexity certificate failed: {0}")]
    ConvexityCertificate(String),
    #[error("boundary subdifferential undefined at vertex {0}")]
    BoundaryVertex(usize),
    #[error("meshes do not match: {0}")]
    MeshMismatch(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("degenerate Hessian nodes: {0} nodes with non-PSD discrete Hessian")]
    DegenerateHessian(usize),
    #[error("node {0} lacks a full stencil")]
    Stencil(usize),
    #[error("section touches the domain boundary")]
    Clipped,
    #[error("w left admissible range: {0:e}")]
    AdmissibleRange(f64),
    #[error("not positive semidefinite: {0}")]
    NotPsd(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("fixed-point stall at t = {t} (gap history {history:?})")]
    Stall { t: f64, history: Vec<f64> },
}

pub type Result<T> = std::result::Result<T, Error>;
