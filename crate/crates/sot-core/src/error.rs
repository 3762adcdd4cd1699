use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid dimensions: {0}")]
    InvalidDims(String),

    #[error("invalid subsystem index {index} for {count} subsystems")]
    InvalidSubsystem { index: usize, count: usize },

    #[error("invalid block index {index} for {count} blocks")]
    InvalidBlock { index: usize, count: usize },

    #[error("operator entries must be finite, found NaN or Inf")]
    NonFiniteEntries,

    #[error("operator is not Hermitian (max |h - h^dag| = {deviation:.3e}, tolerance {tolerance:.1e})")]
    NonHermitian { deviation: f64, tolerance: f64 },

    #[error("operator is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("Kraus operators exceed trace preservation bound (max eigenvalue of sum K^dag K is 1 + {excess:.3e})")]
    KrausBound { excess: f64 },

    #[error("matrix is not column stochastic: {0}")]
    NotStochastic(String),

    #[error("missing block decomposition: {0}")]
    MissingBlocks(String),

    #[error("star product kind `{kind}` does not support {operation}")]
    UnsupportedStarKind { kind: String, operation: String },

    #[error("invalid star product parameter: {0}")]
    InvalidStarParameter(String),

    #[error(
        "singular conditioning: {detail} (offending eigenspace pairs {pairs:?}, cutoff {cutoff:.3e})"
    )]
    SingularConditioning {
        detail: String,
        pairs: Vec<(usize, usize)>,
        cutoff: f64,
    },

    #[error("ill-conditioned superoperator inversion (condition estimate {condition:.3e} > {limit:.1e})")]
    IllConditioned { condition: f64, limit: f64 },

    #[error("singular superoperator: {0}")]
    SingularSuperop(String),

    #[error("invalid star selector `{0}`")]
    InvalidSelector(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
