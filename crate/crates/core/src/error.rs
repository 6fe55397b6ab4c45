use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid estimator configuration: {0}")]
    InvalidConfig(String),

    #[error("window expects {expected} samples, got {got}")]
    SampleCount { expected: usize, got: usize },

    #[error("non-finite sample at index {index}")]
    NonFiniteSample { index: usize },

    #[error("non-uniform sampling: expected t = {expected}, got t = {got}")]
    NonUniformStep { expected: f64, got: f64 },

    #[error("singular diagonal in triangular system at equation {0}")]
    SingularSystem(usize),

    #[error("{scenario}: state left valid region at t = {time:.6} s ({detail})")]
    StateOutOfRegion {
        scenario: String,
        time: f64,
        detail: String,
    },

    #[error("{scenario}: divergence at t = {time:.6} s ({detail})")]
    Divergence {
        scenario: String,
        time: f64,
        detail: String,
    },

    #[error("regression is not yet identifiable (condition number {condition:.3e})")]
    NotIdentifiable { condition: f64 },

    #[error("flow regime violated: {0}")]
    RegimeViolation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown channel `{0}`")]
    UnknownChannel(String),

    #[error("trace is empty")]
    EmptyTrace,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
