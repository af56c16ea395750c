//! Random-top-k gradient sparsification and sparse SpiderBoost.
//!
//! The numeric core is generic over [`Real`] (`f32`, `f64`); the sparsity
//! operator and its enumeration oracle also accept exact rationals through
//! [`Scalar`]. The aliases below fix the common `f64` instantiation.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod optimize;
pub mod problems;
pub mod sampling;
pub mod scalar;
pub mod sparsity;
pub mod vecops;

pub use error::{Error, Result};
pub use scalar::{Real, Scalar};

/// Dense parameter or gradient vector.
pub type ParamVector = vecops::DenseVec<f64>;
/// Output of the sparsity operator, rescaling already applied.
pub type SparseUpdate = vecops::SparseVec<f64>;
pub type ParamVectorF32 = vecops::DenseVec<f32>;
pub type SparseUpdateF32 = vecops::SparseVec<f32>;
/// Exact rational vectors for enumeration checks.
pub type ExactVector = vecops::DenseVec<num_rational::Ratio<i128>>;
pub type OptimizerRun = optimize::RunOutput<f64>;
