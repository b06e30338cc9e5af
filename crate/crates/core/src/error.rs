use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A PNM/PBM stream could not be decoded.
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    /// Two images, or an image and a mask, disagree in shape.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    /// A configuration value is outside its admissible range.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The inpainting system has no known data and no unique solution.
    #[error("singular system: {0}")]
    Singular(String),

    /// A value violates a type invariant (range, length).
    #[error("invalid value: {0}")]
    InvalidValue(String),

    /// A local mask generator failed on one patch.
    #[error("patch {patch} (row {row}, col {col}): {message}")]
    Patch {
        patch: usize,
        row: usize,
        col: usize,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn parse(offset: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn mismatch(expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// Short machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::DimensionMismatch { .. } => "dimension",
            Error::Config(_) => "config",
            Error::Singular(_) => "singular",
            Error::InvalidValue(_) => "value",
            Error::Patch { .. } => "patch",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
