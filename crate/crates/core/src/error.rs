use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("right-hand side has non-zero mean {mean:e} (tolerance {tol:e}); the problem is not solvable on the torus")]
    NonZeroMean { mean: f64, tol: f64 },

    #[error("density {rho} lies outside the model domain ({lo}, {hi})")]
    DomainViolation { rho: f64, lo: f64, hi: f64 },

    #[error("invalid model parameter: {0}")]
    InvalidModel(String),

    #[error("continuity equation violated: residual {residual:e} exceeds tolerance {tol:e}")]
    ContinuityViolated { residual: f64, tol: f64 },

    #[error("bad time window: need 0 < s0 < sT < T, got s0 = {s0}, sT = {s_t}, T = {t_final}")]
    BadWindow { s0: f64, s_t: f64, t_final: f64 },

    #[error("density positivity: no admissible profile amplitude found (last delta {delta:e}, min density {rho_min:e})")]
    PositivityFailure { delta: f64, rho_min: f64 },

    #[error("mass compatibility: initial mass {initial} differs from terminal mass {terminal}")]
    IncompatibleMass { initial: f64, terminal: f64 },

    #[error("momentum compatibility: defect {defect:e} exceeds tolerance {tol:e}")]
    IncompatibleMomentum { defect: f64, tol: f64 },

    #[error("non-positive density: infimum {0} must be strictly positive")]
    NonPositiveDensity(f64),

    #[error("mean momentum endpoint identity: defect {defect:e} exceeds tolerance {tol:e}")]
    EndpointMismatch { defect: f64, tol: f64 },

    #[error("field is not solenoidal: max |div v| = {div:e} exceeds {tol:e}")]
    NotSolenoidal { div: f64, tol: f64 },

    #[error("matrix is not traceless: trace {trace:e}")]
    NotTraceless { trace: f64 },

    #[error("energy level depleted: Lambda reached zero at t = {t}")]
    LambdaDepleted { t: f64 },

    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),

    #[error("{path}: malformed field file at byte {offset}: {msg}")]
    MalformedFile { path: PathBuf, offset: u64, msg: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
