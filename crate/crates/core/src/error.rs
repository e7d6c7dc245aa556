use thiserror::Error;

/// Errors produced by the simulation and analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("eigensolver did not converge within {iterations} iterations")]
    ConvergenceFailure { iterations: usize },

    #[error("no interior minimum bracketed: {0}")]
    BracketFailure(String),

    #[error("no third-order coalescence found (best residual {residual:.3e}, threshold {threshold:.3e})")]
    NotFound {
        best: Box<crate::eigen::Ep3Point>,
        residual: f64,
        threshold: f64,
    },

    #[error("Liouvillian has no stationary state (smallest singular value {sigma_min:.3e}, norm {norm:.3e})")]
    NoStationaryState { sigma_min: f64, norm: f64 },

    #[error("steady state is not unique (second singular value {sigma_2:.3e}, norm {norm:.3e})")]
    DegenerateSteadyState { sigma_2: f64, norm: f64 },

    #[error("time step {dt:.3e} exceeds the stability bound {bound:.3e}")]
    StabilityViolation { dt: f64, bound: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("not a valid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("no peak found in spectrum")]
    NoPeak,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("outside curve support: {0}")]
    OutOfSupport(String),

    #[error("at grid index {index}: {source}")]
    AtGridPoint {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at(index: usize, source: Error) -> Self {
        Error::AtGridPoint {
            index,
            source: Box::new(source),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
