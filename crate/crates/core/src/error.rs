use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch on axis `{axis}`: expected {expected}, got {got}")]
    DimensionMismatch {
        axis: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value for `{0}`")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("item bank exhausted")]
    BankExhausted,

    #[error("coverage guarantee unsatisfiable; uncovered skills: {0:?}")]
    CoverageUnsatisfiable(Vec<usize>),

    #[error("pool too large for exact enumeration: {size} > {max}")]
    PoolTooLarge { size: usize, max: usize },

    #[error("prerequisite graph contains a cycle through skill {0}")]
    CyclicPrereqs(usize),

    #[error("non-finite loss; term breakdown: {0}")]
    NonFiniteLoss(String),

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
