use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A point lies outside (or on the boundary of) the domain an operation needs.
    #[error("domain error: {0}")]
    Domain(String),
    /// The caller passed arguments that violate an operation's preconditions.
    #[error("usage error: {0}")]
    Usage(String),
    /// The game does not provide an oracle the operation needs.
    #[error("unsupported capability: {0}")]
    Unsupported(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("degenerate cost range: lo = {lo}, hi = {hi}")]
    DegenerateRange { lo: f64, hi: f64 },
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    /// A learning loop aborted at the given step.
    #[error("run aborted at step {step}: {source}")]
    Aborted {
        step: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::Aborted {
            step,
            source: Box::new(self),
        }
    }
}
