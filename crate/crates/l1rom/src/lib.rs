//! Dictionary-based model reduction for hyperbolic PDEs.
//!
//! Reduced solutions are linear combinations of precomputed high-dimensional
//! solutions; the coefficients minimize the discrete residual in an L2, L1
//! or Huber sense. The crate also ships the finite-volume/finite-difference
//! test problems, a snapshot POD with its slow-decay study, and a batch
//! experiment runner.

pub mod experiment;
pub mod hdm;
pub mod linalg;
pub mod minimize;
pub mod pod;
pub mod rom;
