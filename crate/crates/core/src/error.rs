use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("empty input")]
    EmptyInput,

    #[error("row {row}: expected {expected} cells, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("malformed delimited text: {0}")]
    Csv(String),

    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("non-numeric value {value:?} at row {row}, column `{column}`")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("column `{0}` has no present values")]
    EmptyColumn(String),

    #[error("matrix has missing cells; impute before {0}")]
    MissingCells(&'static str),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("labels contain a single class")]
    SingleClass,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("checkpoint format: {0}")]
    Format(String),

    #[error("crypto: {0}")]
    Crypto(String),

    #[error("fixed-point overflow at coordinate {coordinate} (value {value})")]
    CodecOverflow { coordinate: usize, value: f64 },

    #[error("privacy budget exceeded: requested total ({epsilon}, {delta}) over cap ({cap_epsilon}, {cap_delta})")]
    BudgetExceeded {
        epsilon: f64,
        delta: f64,
        cap_epsilon: f64,
        cap_delta: f64,
    },

    #[error("worker pool has no workers")]
    PoolIdle,

    #[error("config: {0}")]
    Config(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
