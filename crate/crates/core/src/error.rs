use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("field mean {mean:e} exceeds 1e-10; inverse Laplacian needs zero-mean input")]
    NonZeroMean { mean: f64 },
    #[error("density is not positive at node {node} (value {value:e})")]
    NonPositiveDensity { node: usize, value: f64 },
    #[error("density mean {mean} differs from 1 by more than 1e-8")]
    MassNotNormalized { mean: f64 },
    #[error("Newton stalled after {iterations} iterations (residual {residual:e})")]
    NewtonStalled { iterations: usize, residual: f64 },
    #[error("ellipticity lost: min eigenvalue of I + eps^2 D^2 phi is {min_eigenvalue}")]
    EllipticityLost { min_eigenvalue: f64 },
    #[error("moment matching failed at node {node}: {reason}")]
    MomentMatching { node: usize, reason: String },
    #[error("displacement {displacement} exceeds the velocity box width {width}")]
    DisplacementTooLarge { displacement: f64, width: f64 },
    #[error("CFL violation: dt = {dt} exceeds the limit {limit}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("degenerate density at node {node}: rho = {rho:e} while |J - rho u| = {mismatch:e}")]
    DegenerateDensity { node: usize, rho: f64, mismatch: f64 },
    #[error("at least 3 consecutive snapshots are needed, got {0}")]
    InsufficientSnapshots(usize),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
