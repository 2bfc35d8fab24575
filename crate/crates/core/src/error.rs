use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("points use different representations (mixed denominators or bit widths)")]
    MixedRepresentation,

    #[error("sequence has duplicate values at indices {first} and {second}")]
    Duplicate { first: usize, second: usize },

    #[error("sequence is not strictly increasing at index {0}")]
    NotIncreasing(usize),

    #[error("sequence value at index {0} is out of range (must satisfy 1 <= a < 2^126)")]
    ValueOutOfRange(usize),

    #[error("convex check failed at index {0}")]
    NotConvex(usize),

    #[error("{what} exceeds the configured cap ({value} > {cap})")]
    CapExceeded { what: &'static str, value: u128, cap: u128 },

    #[error("span {span} too large for the convolution path (limit {limit}); use the hash path")]
    SpanTooLarge { span: u128, limit: u128 },

    #[error("convolution result not integral at bin {bin} (deviation {deviation:.3})")]
    ConvolutionInexact { bin: usize, deviation: f64 },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Errors caused by bad user input, as opposed to failed internal checks.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::ConvolutionInexact { .. } | Error::Io(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
