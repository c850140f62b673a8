//! Fuser cost against array size: wall clock and operation counts.

use std::path::PathBuf;
use std::time::Instant;

use h2ad_core::array::ArrayConfig;
use h2ad_core::fusion::{fuse, FusionMethod};
use h2ad_core::{Error, Result};

use crate::config::ExperimentConfig;
use crate::csv::{Cell, CsvWriter};
use crate::doa::{enabled_methods, simulate_candidates, truth};
use crate::{trial_seed, Experiment};

pub const SUMMARY_FILE: &str = "complexity.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityRow {
    pub antennas: usize,
    pub method: FusionMethod,
    /// Wall clock; the only column that varies between reruns.
    pub ns_per_trial: f64,
    pub op_count: f64,
    pub candidates: f64,
    pub failures: usize,
}

#[derive(Debug, Clone)]
pub struct ComplexityReport {
    pub rows: Vec<ComplexityRow>,
    pub csv: PathBuf,
}

impl ComplexityReport {
    pub fn rows_for(&self, method: FusionMethod) -> Vec<&ComplexityRow> {
        self.rows.iter().filter(|r| r.method == method).collect()
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

pub fn run_complexity(cfg: &ExperimentConfig) -> Result<ComplexityReport> {
    cfg.validate()?;
    let methods = enabled_methods(cfg);
    let sources = truth(cfg).len();
    let mut rows = Vec::new();
    for (si, set) in cfg.complexity_sets.iter().enumerate() {
        let array = ArrayConfig::half_wavelength(cfg.subarrays, set.clone())?;
        if !array.is_pairwise_coprime() {
            return Err(Error::Config(format!("complexity set {set:?} is not pairwise coprime")));
        }
        let mut ns = vec![0u128; methods.len()];
        let mut ops = vec![0u64; methods.len()];
        let mut ok = vec![0usize; methods.len()];
        let mut candidates = 0usize;
        let mut built = 0usize;
        // sequential on purpose so timings are not disturbed by other workers
        for r in 0..cfg.complexity_repeats {
            let seed = trial_seed(cfg.seed, Experiment::Complexity, si, r);
            let cands = match simulate_candidates(cfg, &array, cfg.complexity_snr_db, seed) {
                Ok(c) => c,
                Err(e) => {
                    log::warn!("complexity {set:?} repeat {r}: {e}");
                    continue;
                }
            };
            candidates += cands.len();
            built += 1;
            for (mi, &m) in methods.iter().enumerate() {
                let start = Instant::now();
                let res = fuse(m, &cands, sources, &cfg.omc);
                let elapsed = start.elapsed().as_nanos();
                if let Ok(res) = res {
                    ns[mi] += elapsed;
                    ops[mi] += res.op_count;
                    ok[mi] += 1;
                }
            }
        }
        for (mi, &m) in methods.iter().enumerate() {
            let k = ok[mi].max(1) as f64;
            rows.push(ComplexityRow {
                antennas: array.total_antennas(),
                method: m,
                ns_per_trial: if ok[mi] == 0 { f64::NAN } else { ns[mi] as f64 / k },
                op_count: if ok[mi] == 0 { f64::NAN } else { ops[mi] as f64 / k },
                candidates: candidates as f64 / built.max(1) as f64,
                failures: cfg.complexity_repeats - ok[mi],
            });
        }
        log::info!("complexity {set:?} done");
    }

    let mut w = CsvWriter::create(
        &cfg.out_dir.join(SUMMARY_FILE),
        &["antennas", "method", "ns_per_trial", "op_count", "candidates", "failures"],
    )?;
    for r in &rows {
        w.row(&[
            Cell::from(r.antennas),
            Cell::S(r.method.tag()),
            Cell::F(r.ns_per_trial),
            Cell::F(r.op_count),
            Cell::F(r.candidates),
            Cell::from(r.failures),
        ])?;
    }
    Ok(ComplexityReport { rows, csv: w.finish()? })
}
