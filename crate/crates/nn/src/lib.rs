//! Source-count classifiers on covariance eigenvalues: a dense network on
//! five spectral statistics and a 1-D convolutional network on the full
//! log-eigenvalue sequence, plus the minimal layer library they need.
//!
//! Everything is `f64` and single-threaded; results are deterministic for a
//! given seed.

pub mod dataset;
pub mod estimator;
pub mod features;
pub mod flops;
pub mod layers;
pub mod network;
pub mod tensor;
pub mod train;

pub use h2ad_core::{Error, Result};
