use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("model order error: {0}")]
    ModelOrder(String),

    #[error("degenerate signal subspace: {0}")]
    DegenerateSubspace(String),

    #[error("insufficient support: found {found} clusters, need {needed}")]
    InsufficientSupport { found: usize, needed: usize },

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("ill-posed scene: {0}")]
    IllPosed(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
