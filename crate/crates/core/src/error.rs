use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A graph violates a structural precondition (too small, isolated node,
    /// asymmetric adjacency, ...).
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    /// A scalar or configuration value is out of its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Matrix/vector dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Numerical invariants were violated beyond tolerance.
    #[error("numerical instability: {0}")]
    Numerical(String),

    /// The posterior is conditioned on an event of zero probability.
    #[error("degenerate posterior: q(x_t={x_t} | x_0={x_0}) = 0 at t={t}")]
    DegeneratePosterior { x_t: usize, x_0: usize, t: usize },

    /// Too few samples for the requested statistic.
    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    /// A byte stream does not match the expected file format.
    #[error("format error: {0}")]
    Format(String),
}
