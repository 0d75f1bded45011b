use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument or intermediate value violates an operation's contract.
    #[error("domain error: {0}")]
    Domain(String),

    /// The bridge space for a spec is empty, so its uniform density does not exist.
    #[error("bridge space is empty (zero-measure)")]
    EmptySpace,

    #[error("exact count capacity exceeded: K={jumps} > {limit}")]
    Capacity { jumps: i64, limit: i64 },

    #[error("enumeration limit exceeded: K={jumps} > {limit}")]
    EnumerationLimit { jumps: i64, limit: i64 },

    #[error(
        "rejection sampler gave up after {attempts} shuffles (expected acceptance rate {acceptance_rate:.3e})"
    )]
    RetryCap { attempts: u64, acceptance_rate: f64 },

    #[error("unsupported case: {0}")]
    Unsupported(String),

    #[error("observation data, row {row}: {message}")]
    Ingest { row: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
