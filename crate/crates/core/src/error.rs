use thiserror::Error;

/// Errors returned by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Input violates a documented precondition (negative entries, bad parameters, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A constraint cannot be met, e.g. a target mean outside the support.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// The request makes sense only for non-degenerate objects.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// An iterative solver did not reach its tolerance.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// No perturbation radius could be certified.
    #[error("certification failed: {0}")]
    NotCertified(String),
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidInput(format!($($arg)*))
    };
}
pub(crate) use invalid;
