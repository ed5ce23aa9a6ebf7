//! Error types shared across the library.

use thiserror::Error;

/// Library-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    /// Affinity propagation failed to settle on a stable exemplar set.
    /// Carries the exemplar set observed at the last iteration so callers
    /// can inspect it or retry with a higher damping factor.
    #[error("affinity propagation did not converge after {iterations} iterations ({context}); last exemplar set had {} members", last_exemplars.len())]
    NonConvergence {
        iterations: usize,
        last_exemplars: Vec<usize>,
        context: String,
    },
}

impl Error {
    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Attach strategy/window context to a propagated error.
    pub fn with_context(self, ctx: &str) -> Self {
        match self {
            Error::NonConvergence {
                iterations,
                last_exemplars,
                context,
            } => Error::NonConvergence {
                iterations,
                last_exemplars,
                context: if context.is_empty() {
                    ctx.to_string()
                } else {
                    format!("{ctx}: {context}")
                },
            },
            Error::Data(msg) => Error::Data(format!("{ctx}: {msg}")),
            Error::Config(msg) => Error::Config(format!("{ctx}: {msg}")),
            other => other,
        }
    }
}
