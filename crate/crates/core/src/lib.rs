//! Volume-growth thresholds for `Δ_m u + u^p |∇u|^q ≤ 0` on model manifolds.
//!
//! The crate classifies exponent pairs `(p, q)`, computes the sharp volume
//! exponents, builds explicit radial counterexamples on model manifolds and
//! checks every inequality those constructions rely on numerically.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod constructors;
pub mod error;
pub mod estimates;
pub mod manifold;
pub mod params;
pub mod quad;
pub mod radial;
pub mod roots;

pub use error::{Error, Result};
pub use params::{Params, Region};
