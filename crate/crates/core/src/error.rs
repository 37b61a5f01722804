use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter layout mismatch: {left} vs {right}")]
    LayoutMismatch { left: String, right: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown environment id `{0}`")]
    UnknownEnv(String),

    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("stale or mismatched activation tape")]
    StaleTape,

    #[error("checkpoint format error: {0}")]
    Format(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("duplicate trial id {0}")]
    DuplicateTrial(u64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by numerical blow-up rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite(_))
    }
}
