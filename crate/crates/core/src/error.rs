use thiserror::Error;

/// Errors raised by the simulation toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A value type failed one of its invariants.
    #[error("validation failed ({invariant}): {detail}")]
    Validation {
        invariant: &'static str,
        detail: String,
    },

    #[error("mode index {index} out of range for a {n_modes}-mode state")]
    ModeIndex { index: usize, n_modes: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("degenerate state: {0}")]
    Degenerate(String),

    #[error("unphysical channel: {0}")]
    UnphysicalChannel(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    /// The drift matrix has an eigenvalue with non-negative real part.
    #[error(
        "no steady state: drift eigenvalue {re:+e}{im:+e}i is not in the open left half-plane"
    )]
    Unstable { re: f64, im: f64 },

    #[error(
        "step size underflow at t = {t:e} s; the system is stiff, use steady_state_cov instead"
    )]
    Stiff { t: f64 },

    #[error("no convergence after {iterations} iterations (last residual {residual:e}); possible bistability")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("numerical degeneracy: {0}")]
    Numerical(String),

    #[error("blocks are not reducible to standard form: {0}")]
    NonStandardForm(String),

    #[error("amplifier at or above threshold: |lambda1| / (kappa/2) = {ratio}")]
    AboveThreshold { ratio: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn validation(invariant: &'static str, detail: impl Into<String>) -> Error {
    Error::Validation {
        invariant,
        detail: detail.into(),
    }
}
