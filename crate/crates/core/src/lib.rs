//! Weighted least-squares approximation of a parametric elliptic problem
//! with a lognormal coefficient built from a Schauder field.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod fem1d;
pub mod field;
pub mod hermite;
pub mod multiindex;
pub mod rng;
pub mod sampling;
pub mod weights;
pub mod wls;

pub use error::{Error, Result};
