use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("location coincides with the base station at the origin; path loss is undefined there")]
    OriginQuery,

    #[error("covariance factorization failed after exhausting the jitter ladder (numerically degenerate geometry)")]
    DegenerateCovariance,

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("k = {k} exceeds the sample count {n}")]
    KExceedsSamples { k: usize, n: usize },

    #[error("layout produced no points after BS exclusion")]
    EmptyLayout,

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 1 for configuration problems,
    /// 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_) | Error::Config(_) | Error::Parse(_) => 1,
            _ => 2,
        }
    }
}
