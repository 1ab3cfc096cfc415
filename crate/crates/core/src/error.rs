use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised across the library.
///
/// The CLI maps these onto exit codes, so variants are grouped by kind:
/// parsing/configuration problems, domain violations, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("argument {value} outside the domain of {what}")]
    Domain { what: &'static str, value: f64 },

    #[error("weight mass {mass:e} is degenerate (must be > 1e-300)")]
    DegenerateMass { mass: f64 },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("quadrature did not converge on [{lower}, {upper}]")]
    Integration { lower: f64, upper: f64 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("indeterminate score difference (inf - inf) at index {index}")]
    Indeterminate { index: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }

    /// True for errors caused by malformed user input (grammar, flags, config).
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Parse(_) | Error::Config(_) | Error::InvalidParameter(_) | Error::Unsupported(_))
    }

    /// True for errors caused by reading or writing files.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Format { .. })
    }
}
