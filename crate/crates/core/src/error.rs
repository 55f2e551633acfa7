use thiserror::Error;

/// Errors produced by this crate.
#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    /// Weights were empty, negative, non-finite, or summed to observed zero.
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    /// A co-occurrence table failed shape or content validation.
    #[error("invalid table: {0}")]
    InvalidTable(String),

    /// A count fell outside `0..=n`.
    #[error("count {count} out of range for {n} trials")]
    CountOutOfRange { count: u32, n: u32 },

    /// A ratio pair failed validation.
    #[error("invalid pair: {0}")]
    InvalidPair(String),

    /// Relative entropy change is undefined without positive baseline entropy.
    #[error("undefined baseline: baseline entropy must be positive")]
    UndefinedBaseline,

    /// An optional record field was required by the operation but absent.
    #[error("missing field: {0}")]
    MissingField(&'static str),

    /// An operation that needs data received none.
    #[error("empty dataset")]
    EmptyDataset,

    /// A data file violated the expected schema.
    #[error("{file}:{line}: {message}")]
    Schema {
        file: String,
        line: u64,
        message: String,
    },

    /// Primacy is undefined for sequences missing one of the two variants.
    #[error("undefined primacy score: {0}")]
    UndefinedScore(String),

    /// A parameter was outside its documented range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Power iteration ran out of iterations before reaching tolerance.
    #[error("stationary solve did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: u64, residual: f64 },

    /// I/O failure while reading or writing.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Malformed CSV transport (quoting, record length, encoding).
    #[error(transparent)]
    Csv(#[from] csv::Error),

    /// Malformed JSON transport.
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True when the error is the caller's fault (bad input or argument)
    /// rather than an internal numeric failure. The CLI maps this to its
    /// exit-code split.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::NoConvergence { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
