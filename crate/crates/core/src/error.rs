use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KppError {
    /// Invalid configuration; `field` is a dotted path such as `domain.h`.
    #[error("{field}: {message}")]
    Config { field: String, message: String },

    /// A KPP structural hypothesis fails for the supplied nonlinearity.
    #[error("hypothesis {hypothesis} violated: {message}")]
    Hypothesis {
        hypothesis: &'static str,
        message: String,
    },

    #[error("incompatible domain: {0}")]
    DomainMismatch(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("time step {dt} exceeds stability limit {limit}")]
    Cfl { dt: f64, limit: f64 },

    #[error("solution blew up at t = {time}")]
    BlowUp { time: f64 },

    #[error("empty region: {0}")]
    EmptyRegion(String),

    #[error("part metric undefined outside X++: value {value} at index {index} is not above {floor}")]
    NotStrictlyPositive { index: usize, value: f64, floor: f64 },

    /// The zero state is not unstable: principal growth at zero tilt is `lambda <= 0`.
    #[error("degenerate medium: principal growth at zero tilt is {lambda} (must be positive)")]
    DegenerateMedium { lambda: f64 },

    #[error("minimum of lambda/mu at bracket edge mu = {mu}; widen the bracket")]
    BracketEdge { mu: f64 },

    #[error("power iteration did not converge after {iterations} periods (log-factor spread {spread:e})")]
    NonConvergence { iterations: usize, spread: f64 },

    #[error("extinction at period {period}: medium does not satisfy instability assumption")]
    Extinction { period: usize },

    #[error("domain too small for t_end: front reached the buffer at t = {time}")]
    FrontEscaped { time: f64 },

    #[error("no level crossing: {0}")]
    NoCrossing(String),

    #[error("io: {0}")]
    Io(String),

    #[error("parse: {0}")]
    Parse(String),
}

impl KppError {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        KppError::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for KppError {
    fn from(err: std::io::Error) -> Self {
        KppError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, KppError>;
