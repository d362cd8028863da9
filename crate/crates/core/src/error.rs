use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("parameter layout mismatch: {0}")]
    Layout(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("infeasible scenario: {0}")]
    Infeasible(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("unknown algorithm `{name}`; available: {}", available.join(", "))]
    UnknownAlgorithm {
        name: String,
        available: Vec<&'static str>,
    },

    #[error("plugin contract violated by client {client}: {detail}")]
    Protocol { client: usize, detail: String },

    #[error("training diverged on client {client}: {detail}")]
    Divergence { client: usize, detail: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
