use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    /// A moment that does not exist (v <= 2 for inverse-variance moments).
    #[error("singularity in {op}: requires v >= 3, got v = {v}")]
    Singularity { op: &'static str, v: u32 },

    /// A study, table or configuration violates a structural invariant.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// Partial overlap with no usable k factor.
    #[error("k factor required: outcomes overlap only partially and no k was supplied")]
    KRequired,

    /// k cannot be estimated when the outcomes are uncorrelated.
    #[error("k factor is unidentifiable at rho = 0")]
    Unidentifiable,

    /// Assembled matrix failed the positive semidefinite check.
    #[error("covariance matrix is not positive semidefinite: smallest eigenvalue {min_eigenvalue:e}, largest {max_eigenvalue:e}")]
    NotPsd {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },

    #[error("method {method} cannot be applied to a {design} design")]
    MethodMismatch {
        method: &'static str,
        design: &'static str,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Error {
    Error::Domain {
        op,
        detail: detail.into(),
    }
}
