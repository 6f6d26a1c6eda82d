use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid argument `{field}`: {reason}")]
    InvalidArgument { field: String, reason: String },

    #[error("invalid gabor parameters: {}", .0.join("; "))]
    InvalidGabor(Vec<String>),

    #[error("missing weight entry `{0}`")]
    MissingWeight(String),

    #[error("weight `{name}` has shape {found:?}, expected {expected:?}")]
    WeightShape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("corrupt weight manifest at line {line}: {reason}")]
    CorruptManifest { line: usize, reason: String },

    #[error("truncated weight blob for `{name}`: need {needed} bytes, have {available}")]
    TruncatedBlob {
        name: String,
        needed: usize,
        available: usize,
    },

    #[error("pgm: {0}")]
    Pgm(String),

    #[error("gesture class {0} is not mapped to a command")]
    UnmappedClass(usize),

    #[error("invalid flight state: {0}")]
    FlightState(String),

    #[error("innovation covariance is singular (condition estimate {condition:e})")]
    SingularInnovation { condition: f64 },

    #[error("flight log line {line}: {reason}")]
    LogFormat { line: usize, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
