//! Within-study variance-covariance matrices for standardized mean
//! differences (Hedges' g) in multivariate meta-analysis.
//!
//! Two designs are supported: several outcomes measured on overlapping
//! subjects, and several treatment arms sharing one control arm. Each
//! analytic approximation in [`engine`] has a simulated counterpart in
//! [`mc_oracle`] that it can be checked against.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod engine;
pub mod error;
pub mod mc_oracle;
pub mod model;
pub mod special;
pub mod tables;

pub use engine::{assemble_cov_matrix, AssembleOptions, Design, KEstimation, Method};
pub use error::{Error, Result};
pub use mc_oracle::{Generator, McEstimate, McMatrix, SimConfig, SimDesign, ValidationReport};
pub use model::{
    CovMatrix, EffectVector, GroupSummary, Mode, MultiArmStudy, MultiOutcomeStudy, OutcomeLink,
    PooledGroups, TwoGroup, TwoOutcomeStudy,
};
pub use special::Dof;
