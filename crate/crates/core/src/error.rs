use thiserror::Error;

/// Errors surfaced by the simulation laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("operation undefined for a constant field")]
    ConstantField,

    #[error("mode index {index} exceeds the Nyquist limit for {points} points on axis {axis}")]
    ModeAboveNyquist {
        axis: usize,
        index: usize,
        points: usize,
    },

    #[error("perturbation budget unattainable after nonnegativity clipping (achieved {achieved}, requested {requested})")]
    BudgetUnattainable { requested: f64, achieved: f64 },

    #[error("steady state inconsistent with parameters (reaction residual {residual})")]
    InconsistentSteadyState { residual: f64 },

    #[error("explicit taxis CFL guard violated at t = {t}: estimate {estimate} > guard {guard}; suggested dt = {suggested_dt}")]
    CflViolation {
        t: f64,
        estimate: f64,
        guard: f64,
        suggested_dt: f64,
    },

    #[error("linear solve failed to converge within {iterations} iterations (relative residual {residual})")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("field magnitude exceeded the blow-up sentinel at t = {t}")]
    BlowUp { t: f64 },

    #[error("operation not applicable: {0}")]
    NotApplicable(String),

    #[error("config hash mismatch: expected {expected}, file carries {found}")]
    HashMismatch { expected: String, found: String },

    #[error("malformed data file {path}: {reason}")]
    MalformedFile { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code the CLI maps this error to.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameters(_)
            | Error::InvalidConfig(_)
            | Error::ModeAboveNyquist { .. }
            | Error::Toml(_) => 1,
            _ => 2,
        }
    }
}
