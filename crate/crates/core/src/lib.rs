//! Core numerics for heterogeneous hybrid analog-digital (H²AD) array receivers.
//!
//! The crate covers the array geometry and steering model, synthetic snapshot
//! generation through the analog combining chain, covariance and Hermitian
//! eigen-analysis, eigen-domain clustering for source counting, per-group
//! ESPRIT with ambiguity expansion, candidate fusion, and the multi-source
//! Cramér–Rao bound.
//!
//! Angles are radians everywhere in this crate. Group indices are zero-based.

pub mod array;
pub mod crlb;
pub mod edc;
mod error;
pub mod esprit;
pub mod fusion;
pub mod linalg;
pub mod signal;
pub mod spectral;

pub use error::{Error, Result};

/// Complex sample type used throughout.
pub type C64 = num_complex::Complex64;

/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
