//! Safe bandit-feedback optimization with polytope sharpness geometry.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too; index loops
// mirror the textbook triangular solves.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod geometry;
pub mod linalg;
pub mod lp;
pub mod estimation;
pub mod safe_set;
pub mod policy;
pub mod simulator;
pub mod campaign;

pub use error::{Error, Result};
