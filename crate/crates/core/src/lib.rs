//! Numerical toolkit for the sharp L^p entropy inequality, the
//! Gagliardo–Nirenberg family that converges to it, geodesic bubbles on
//! model manifolds, the penalized constrained minimization on those
//! manifolds, and the Bakry hypercontractivity integrals.

// `!(x > 0.0)` is used on purpose throughout so that NaN lands in the error branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod error;
pub mod euclidean_inequalities;
pub mod gn_estimator;
pub mod hypercontractivity;
pub mod manifold_geometry;
pub mod manifold_minimizer;
pub mod profiles;
pub mod special_fn;

pub use error::{Error, Result};
