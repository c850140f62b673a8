//! Experiment runner: configuration, Monte Carlo sweeps and CSV output for
//! source counting, direction finding, fuser complexity and the bound.
//!
//! Every trial draws its randomness from a seed derived from the master
//! seed, the experiment, the sweep point and the trial index, and rows are
//! written in sweep order, so reruns produce identical files.

pub mod bound;
pub mod complexity;
pub mod config;
pub mod csv;
pub mod doa;
pub mod number;
pub mod pool;
pub mod training;

use h2ad_core::signal::mix_seed;
pub use h2ad_core::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    NumberSensing = 1,
    Doa = 2,
    Complexity = 3,
}

pub fn trial_seed(master: u64, experiment: Experiment, point: usize, trial: usize) -> u64 {
    let stream = ((experiment as u64) << 56) | ((point as u64) << 32) | trial as u64;
    mix_seed(master, stream)
}

pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Process exit code for an error that stopped a run.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Input(_) => EXIT_CONFIG,
        Error::Io(_) => EXIT_IO,
        _ => EXIT_NUMERIC,
    }
}
