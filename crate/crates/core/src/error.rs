use thiserror::Error;

/// Errors raised anywhere in the fitting pipeline.
///
/// The variants are grouped by the stage that produced them so callers (the
/// CLI in particular) can map them onto distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("formula error: {0}")]
    Formula(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("model specification error: {0}")]
    Model(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("sampler error in chain {chain}, iteration {iteration}, node {node}: {message}")]
    Sampler {
        chain: usize,
        iteration: usize,
        node: String,
        message: String,
    },

    #[error("diagnostics error: {0}")]
    Diagnostics(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn syntax(offset: usize, message: impl Into<String>) -> Self {
        Error::Syntax {
            offset,
            message: message.into(),
        }
    }
}
