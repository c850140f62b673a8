//! Summary statistics of an eigenvalue spectrum.

use crate::{Error, Result};

/// Smallest value fed to a logarithm.
pub const LOG_FLOOR: f64 = 1e-300;

/// `[ln max, ln min, ln std, ln mean, entropy]` of a spectrum.
///
/// `clamped` is set when any logarithm argument (an eigenvalue or the
/// standard deviation) had to be raised to [`LOG_FLOOR`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub values: [f64; 5],
    pub clamped: bool,
}

impl FeatureVector {
    pub fn log_max(&self) -> f64 {
        self.values[0]
    }
    pub fn log_min(&self) -> f64 {
        self.values[1]
    }
    pub fn log_std(&self) -> f64 {
        self.values[2]
    }
    pub fn log_mean(&self) -> f64 {
        self.values[3]
    }
    pub fn entropy(&self) -> f64 {
        self.values[4]
    }

    /// The first `n` statistics (4 drops the entropy).
    pub fn truncated(&self, n: usize) -> Vec<f64> {
        self.values[..n.min(5)].to_vec()
    }
}

pub fn extract_features(eigenvalues: &[f64]) -> Result<FeatureVector> {
    let m = eigenvalues.len();
    if m < 2 {
        return Err(Error::Input(format!("need at least 2 eigenvalues, got {m}")));
    }
    if eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite eigenvalue".into()));
    }
    let mut clamped = false;
    let lam: Vec<f64> = eigenvalues
        .iter()
        .map(|&v| {
            if v < LOG_FLOOR {
                clamped = true;
                LOG_FLOOR
            } else {
                v
            }
        })
        .collect();
    let n = m as f64;
    let max = lam.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = lam.iter().copied().fold(f64::INFINITY, f64::min);
    let sum: f64 = lam.iter().sum();
    let mean = sum / n;
    let var = lam.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let mut std = var.sqrt();
    if std < LOG_FLOOR {
        clamped = true;
        std = LOG_FLOOR;
    }
    let entropy = -lam
        .iter()
        .map(|v| {
            let p = v / sum;
            if p > 0.0 {
                p * p.ln()
            } else {
                0.0
            }
        })
        .sum::<f64>();
    Ok(FeatureVector {
        // mean can round a hair outside [min, max] for flat spectra
        values: [max.ln(), min.ln(), std.ln(), mean.clamp(min, max).ln(), entropy.clamp(0.0, n.ln())],
        clamped,
    })
}

/// Natural log of every eigenvalue, floored at [`LOG_FLOOR`]; the CNN input.
pub fn log_spectrum(eigenvalues: &[f64]) -> Vec<f64> {
    eigenvalues.iter().map(|v| v.max(LOG_FLOOR).ln()).collect()
}
