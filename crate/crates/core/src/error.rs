use thiserror::Error;

#[derive(Debug, Error)]
pub enum ErgoError {
    #[error("unknown map family `{0}`")]
    UnknownFamily(String),
    #[error("unknown potential `{0}`")]
    UnknownPotential(String),
    #[error("parameter `{name}` = {value} out of range: {reason}")]
    ParamOutOfRange {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("missing parameter `{0}`")]
    MissingParam(&'static str),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("resolution mismatch: expected {expected}, got {got}")]
    ResolutionMismatch { expected: usize, got: usize },
    #[error("{what} requires a one-dimensional map")]
    NotOneDimensional { what: &'static str },
    #[error("radius {radius} exceeds the injectivity scale {limit}; use a smaller radius")]
    RadiusTooLarge { radius: f64, limit: f64 },
    #[error("cylinder count too large: {0}")]
    BlockTooLarge(String),
    #[error("power iteration did not converge after {iterations} steps (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("ladder too short to extrapolate: {0}")]
    LadderTooShort(String),
    #[error("unsupported measure: {0}")]
    UnsupportedMeasure(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = ErgoError> = std::result::Result<T, E>;
