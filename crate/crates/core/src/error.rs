use thiserror::Error;

/// Errors shared by all solver modules.
#[derive(Debug, Error)]
pub enum Error {
    /// A dimension outside the supported range was requested.
    #[error("dimension n = {got} not supported here (need n >= {min})")]
    Dimension { min: u32, got: u32 },

    /// An argument left the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value violates its invariants.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The adaptive integrator could not produce a usable trajectory.
    #[error("integration failed: {0}")]
    Integration(String),

    /// A solution left a bound it is proven to respect, by more than the
    /// numerical tolerance. Indicates insufficient integrator accuracy.
    #[error("barrier violated: {0}")]
    Barrier(String),

    /// An iteration did not converge within its budget.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// Requested evaluation outside the data a profile covers.
    #[error("profile coverage: {0}")]
    Coverage(String),
}

pub type Result<T> = std::result::Result<T, Error>;
