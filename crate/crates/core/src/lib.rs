//! Low-rank and sparse tensor approximation of functions with mixed
//! smoothness on products of unit cubes.
//!
//! The crate is organised bottom-up: [`mra`] provides wavelet coefficient
//! tensors, [`sparse_tensor`] the anisotropic sparse index sets, [`lowrank`]
//! the bivariate SVD and rank/rate formulas, [`tensor_train`] the TT-SVD, and
//! [`testbed`] the oracle functions used for validation.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod container;
pub mod error;
pub mod lowrank;
pub mod mra;
pub mod sparse_tensor;
pub mod tensor;
pub mod tensor_train;
pub mod testbed;

pub use error::{Error, Result};
pub use tensor::DenseTensor;
