use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("invalid group selection: {0}")]
    InvalidSelection(String),
    /// Two overlapping circles sit on (numerically) the same center, so the
    /// direction of the overlap gradient is undefined.
    #[error("circles {first} and {second} have coincident centers (distance {distance:e})")]
    Singular {
        first: usize,
        second: usize,
        distance: f64,
    },
    #[error("search direction is not a descent direction (directional derivative {slope:e})")]
    NotDescent { slope: f64 },
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
