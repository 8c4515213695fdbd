use std::path::PathBuf;

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("could not place {placed} of {requested} transmitters with the required separation after {attempts} attempts")]
    PlacementInfeasible {
        placed: usize,
        requested: usize,
        attempts: usize,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("dual variable {index} is negative ({value})")]
    NegativeDual { index: usize, value: f64 },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("zero channel gain on link ({0}, {1})")]
    ZeroChannel(usize, usize),
    #[error("edge normalizer is zero")]
    DegenerateNorm,
    #[error("non-finite activation in layer {layer}")]
    NonFiniteActivation { layer: usize },
    #[error("non-finite loss at training iteration {iteration}")]
    NonFiniteLoss { iteration: usize },
    #[error("unsupported dual distribution: {0}")]
    UnsupportedDistribution(String),
    #[error("network size {m} exceeds the limit of {limit}")]
    SizeLimitExceeded { m: usize, limit: usize },
    #[error("dual update window has {got} rows, expected {expected}")]
    WindowLengthMismatch { got: usize, expected: usize },
    #[error("checkpoint dims {found} do not match configured dims {expected}")]
    CheckpointDimMismatch { expected: String, found: String },
    #[error("gradient check failed: max relative error {0:e}")]
    InvalidGradient(f64),
    #[error("{0} property checks failed")]
    PropertyFailed(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// Process exit code for the command-line tool: 2 config, 3 numeric, 4 I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::InvalidConfig(_)
            | Error::UnsupportedDistribution(_)
            | Error::SizeLimitExceeded { .. }
            | Error::CheckpointDimMismatch { .. }
            | Error::PlacementInfeasible { .. } => 2,
            Error::Io { .. } | Error::Format { .. } => 4,
            _ => 3,
        }
    }
}
