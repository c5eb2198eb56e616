use thiserror::Error;

/// Errors raised by the engines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Market or problem parameters violate their invariants.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// A solver or simulation configuration is unusable.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// The explicit scheme would be unstable on this grid.
    #[error(
        "CFL violation: dt = {dt:e} exceeds the stable bound {max_dt:e}; use n_t >= {min_n_t}"
    )]
    Cfl { dt: f64, max_dt: f64, min_n_t: usize },

    /// A computation produced a non-finite value.
    #[error("numerical error: {0}")]
    Numerical(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
