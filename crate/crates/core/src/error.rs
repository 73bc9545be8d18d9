use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors shared across the crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Weights or probabilities do not form a distribution.
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    /// An argument is outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Conditioning on an event of probability zero.
    #[error("conditioning on a null event: {0}")]
    ImpossibleConditioning(String),

    /// An enumeration guardrail was exceeded.
    #[error(
        "enumeration of {what} too large: projected {projected:.3e} items exceeds limit {limit}"
    )]
    EnumerationTooLarge {
        what: &'static str,
        projected: f64,
        limit: u64,
    },

    /// A type system does not define a partition.
    #[error("invalid type system: {0}")]
    InvalidSystem(String),

    /// The search target is unreachable for the given schedule.
    #[error("search cannot succeed: {0}")]
    ImpossibleSearch(String),

    /// The simulator hit its restart guard before reaching the target level.
    #[error("restart cap of {0} exceeded; the success probability is too small for simulation")]
    RestartCapExceeded(u64),
}
