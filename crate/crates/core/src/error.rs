use std::path::PathBuf;

/// Errors raised by the numerical core.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid sequence: {0}")]
    InvalidSeq(String),

    #[error("negative term {value} at index {index} cannot be raised to fractional power {alpha}")]
    NegativeFractionalPower { index: usize, value: f64, alpha: f64 },

    #[error("unsupported sequence pair for {op}: {num} / {den}")]
    UnsupportedPair {
        op: &'static str,
        num: String,
        den: String,
    },

    #[error("zero denominator term at index {index}")]
    ZeroDenominator { index: usize },

    #[error("sequence {0} does not decay; its tail sum is infinite")]
    NotDecaying(String),

    #[error("invalid block: {0}")]
    InvalidBlock(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature did not reach tolerance {tol:e} (estimate {estimate}, error {error:e})")]
    Quadrature { tol: f64, estimate: f64, error: f64 },

    #[error("enumeration needs {states} states, above the limit {limit}")]
    TooManyStates { states: u128, limit: u128 },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
