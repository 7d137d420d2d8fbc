use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("Hurst parameter must lie in (0, 1), got {0}")]
    InvalidHurst(f64),
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("ill-conditioned grid: covariance matrix is not numerically positive definite")]
    IllConditionedGrid,
    #[error("mismatched grids: {0}")]
    GridMismatch(String),
    #[error("time {t} is not aligned to the grid step {dt}")]
    NotGridAligned { t: f64, dt: f64 },
    #[error("ratio precondition violated: need t2 > 2*t1 > 0 (t1 = {t1}, t2 = {t2})")]
    RatioPrecondition { t1: f64, t2: f64 },
    #[error("support of the drift signal violates the declared mode: {0}")]
    ModeViolation(String),
    #[error("blow-up: non-finite state at t = {t}")]
    BlowUp { t: f64 },
    #[error("kappa2 too small: |rho| = {residual:e} at t = 1/2")]
    KappaTooSmall { residual: f64 },
    #[error("horizon exceeded: {0}")]
    HorizonExceeded(String),
    #[error("excluded by theory: H = 1/2")]
    ExcludedByTheory,
    #[error("no coupling observed; increase t_max")]
    NoCouplingObserved,
    #[error("empty experiment: sample_count must be positive")]
    EmptyExperiment,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
