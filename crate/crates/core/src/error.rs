use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value or shape violates a model invariant.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The best-response solver hit its iteration cap without a VI certificate.
    #[error("best-response solver did not converge after {iterations} iterations (theta = {theta}, vi margin = {vi_margin:e})")]
    Solver {
        theta: f64,
        iterations: usize,
        vi_margin: f64,
        last_iterate: Vec<f64>,
    },

    /// A solver failure raised while simulating a specific round.
    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("theta is not identifiable in state {omega}: (P^T - I) pi is zero")]
    Unidentifiable { omega: usize },

    #[error("failed to parse {path}: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
