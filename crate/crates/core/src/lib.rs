//! Joint unsupervised feature selection and adaptive imputation for
//! multi-view data with mixed missing patterns.
//!
//! The model factorizes each view as `X^v ≈ W^v (F^v + F*)^T` with an
//! l2,1-sparse feature matrix `W^v`, a shared nonnegative near-orthogonal
//! cluster indicator `F*`, and a sparse view-specific correction `F^v`.
//! Missing entries of each view are optimization variables, guided by the
//! consensus cluster structure and by per-view k-sparse similarity graphs
//! fused into a consensus graph `H` with learned view weights.

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod model;
pub mod numkit;

pub use error::{ClimError, Result};
