//! Cayley balls of groups of polynomial growth, discrete harmonic functions on
//! them, and the numerical apparatus built on top: growth statistics,
//! Poincaré / mean value / Harnack probes, Gram-matrix dimension estimates with
//! an exact polynomial oracle, and rough isometries with the extension operator.

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod balls;
pub mod cache;
pub mod dimension;
mod error;
pub mod groups;
pub mod harmonic;
pub mod inequalities;
pub mod numeric;
pub mod polytable;
pub mod rough;
pub mod solver;
pub mod volume;

pub use balls::{CayleyBall, VertexSubset};
pub use error::{Error, Result};
pub use groups::{GeneratingSet, GroupElement, GroupSpec};
pub use harmonic::{DirichletSolution, ScalarField};
pub use volume::GrowthSeries;
