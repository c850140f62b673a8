//! Direction-finding sweep over the three fusers, with the bound alongside.

use std::path::PathBuf;

use h2ad_core::array::ArrayConfig;
use h2ad_core::crlb::crlb;
use h2ad_core::esprit::{build_candidate_set, CandidateAngleSet};
use h2ad_core::fusion::{accuracy_and_rmse, fuse, score_trial, FusionMethod, TrialScore};
use h2ad_core::signal::{generate_all_groups, Combining, SourceScene};
use h2ad_core::Result;

use crate::config::ExperimentConfig;
use crate::csv::{trial_row, Cell, CsvWriter, TRIAL_HEADER};
use crate::pool::parallel_map;
use crate::{trial_seed, Experiment};

pub const TRIALS_FILE: &str = "doa_trials.csv";
pub const SUMMARY_FILE: &str = "doa.csv";
pub const CANDIDATES_FILE: &str = "doa_candidates.csv";

pub fn doa_array(cfg: &ExperimentConfig) -> Result<ArrayConfig> {
    ArrayConfig::half_wavelength(cfg.subarrays, cfg.antennas_per_subarray.clone())
}

pub fn truth(cfg: &ExperimentConfig) -> Vec<f64> {
    let mut t: Vec<f64> = cfg.doa_angles_deg.iter().map(|d| d.to_radians()).collect();
    t.sort_by(f64::total_cmp);
    t
}

pub fn enabled_methods(cfg: &ExperimentConfig) -> Vec<FusionMethod> {
    let e = &cfg.estimators;
    FusionMethod::ALL
        .into_iter()
        .filter(|m| match m {
            FusionMethod::Omc => e.omc,
            FusionMethod::Wgmd => e.wgmd,
            FusionMethod::Wlmd => e.wlmd,
        })
        .collect()
}

/// Candidates for one simulated trial.
pub fn simulate_candidates(
    cfg: &ExperimentConfig,
    array: &ArrayConfig,
    snr_db: f64,
    seed: u64,
) -> Result<CandidateAngleSet> {
    let scene = SourceScene::with_snr_db(truth(cfg), snr_db, cfg.snapshots, seed)?;
    let groups = generate_all_groups(array, &scene, Combining::Analog)?;
    build_candidate_set(array, &groups, scene.num_sources())
}

#[derive(Debug, Clone)]
pub struct FuserTrial {
    pub gated: TrialScore,
    /// Matched errors with no gate, radians.
    pub ungated: TrialScore,
    pub op_count: u64,
}

#[derive(Debug, Clone)]
pub struct DoaTrial {
    pub candidates: usize,
    pub per_method: Vec<std::result::Result<FuserTrial, String>>,
}

fn run_trial(cfg: &ExperimentConfig, array: &ArrayConfig, methods: &[FusionMethod], snr: f64, seed: u64) -> DoaTrial {
    let truth = truth(cfg);
    let set = match simulate_candidates(cfg, array, snr, seed) {
        Ok(s) => s,
        Err(e) => {
            return DoaTrial {
                candidates: 0,
                per_method: vec![Err(format!("candidates: {e}")); methods.len()],
            }
        }
    };
    let gate = cfg.gate_deg.to_radians();
    let per_method = methods
        .iter()
        .map(|&m| {
            fuse(m, &set, truth.len(), &cfg.omc)
                .map(|r| FuserTrial {
                    gated: score_trial(&r.angles, &truth, gate),
                    ungated: score_trial(&r.angles, &truth, f64::INFINITY),
                    op_count: r.op_count,
                })
                .map_err(|e| e.to_string())
        })
        .collect();
    DoaTrial {
        candidates: set.len(),
        per_method,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoaRow {
    pub snr_db: f64,
    pub estimator: String,
    pub angle_deg: f64,
    /// Fraction of trials with every angle inside the gate.
    pub accuracy: f64,
    pub angle_accuracy: f64,
    /// Over trials where this angle is inside the gate.
    pub rmse_deg: f64,
    /// Over every completed trial, no gate.
    pub rmse_all_deg: f64,
    pub crlb_deg: f64,
    pub trials: usize,
    pub failures: usize,
    pub candidates_min: usize,
    pub candidates_max: usize,
}

#[derive(Debug, Clone)]
pub struct DoaReport {
    pub rows: Vec<DoaRow>,
    pub summary_csv: PathBuf,
    pub trials_csv: PathBuf,
    pub candidates_csv: PathBuf,
}

impl DoaReport {
    pub fn rows_for(&self, estimator: &str) -> impl Iterator<Item = &DoaRow> {
        let tag = estimator.to_string();
        self.rows.iter().filter(move |r| r.estimator == tag)
    }
}

fn ungated_rmse_deg(trials: &[Option<TrialScore>], i: usize) -> f64 {
    let errs: Vec<f64> = trials
        .iter()
        .flatten()
        .filter_map(|t| t.errors.get(i).copied().flatten())
        .collect();
    if errs.is_empty() {
        return f64::NAN;
    }
    (errs.iter().map(|e| e.to_degrees().powi(2)).sum::<f64>() / errs.len() as f64).sqrt()
}

pub fn run_doa(cfg: &ExperimentConfig) -> Result<DoaReport> {
    cfg.validate()?;
    let array = doa_array(cfg)?;
    if let Some(w) = array.spacing_warning() {
        log::warn!("{w}");
    }
    let methods = enabled_methods(cfg);
    let truth = truth(cfg);
    let n = cfg.trials;
    let workers = cfg.worker_count();

    let mut trials_csv = CsvWriter::create(&cfg.out_dir.join(TRIALS_FILE), &TRIAL_HEADER)?;
    let mut cands_csv = CsvWriter::create(
        &cfg.out_dir.join(CANDIDATES_FILE),
        &["snr_db", "angle_deg", "group", "branch", "m"],
    )?;
    let mut rows = Vec::new();
    for (si, snr) in cfg.doa_sweep.points().into_iter().enumerate() {
        // candidate cloud of the first trial at each point
        if let Ok(set) = simulate_candidates(cfg, &array, snr, trial_seed(cfg.seed, Experiment::Doa, si, 0)) {
            for c in &set.candidates {
                cands_csv.row(&[
                    Cell::F(snr),
                    Cell::F(c.angle.to_degrees()),
                    Cell::from(c.group),
                    Cell::from(c.branch),
                    Cell::from(c.m),
                ])?;
            }
        }
        let trials: Vec<DoaTrial> = parallel_map(n, workers, |t| {
            run_trial(cfg, &array, &methods, snr, trial_seed(cfg.seed, Experiment::Doa, si, t))
        });
        let bound = crlb(
            &array,
            &SourceScene::with_snr_db(truth.clone(), snr, cfg.snapshots, 0)?,
            cfg.snapshots,
            false,
        )?
        .std_deg();

        for (t, trial) in trials.iter().enumerate() {
            for (m, r) in methods.iter().zip(&trial.per_method) {
                let mut emit = |metric: &str, value| trial_row(&mut trials_csv, "doa", snr, t, m.tag(), metric, value);
                emit("candidates", Cell::from(trial.candidates))?;
                match r {
                    Ok(f) => {
                        emit("correct", Cell::from(usize::from(f.gated.all_correct())))?;
                        emit("op_count", Cell::U(f.op_count))?;
                        for (i, e) in f.ungated.errors.iter().enumerate() {
                            let v = e.map_or(f64::NAN, |e| e.to_degrees().abs());
                            emit(&format!("abs_error_deg_{i}"), Cell::F(v))?;
                        }
                    }
                    Err(msg) => {
                        log::warn!("doa {snr} dB trial {t} {}: {msg}", m.tag());
                        emit("failure", Cell::U(1))?;
                    }
                }
            }
        }

        let cmin = trials.iter().map(|t| t.candidates).min().unwrap_or(0);
        let cmax = trials.iter().map(|t| t.candidates).max().unwrap_or(0);
        for (mi, m) in methods.iter().enumerate() {
            let gated: Vec<Option<TrialScore>> =
                trials.iter().map(|t| t.per_method[mi].as_ref().ok().map(|f| f.gated.clone())).collect();
            let ungated: Vec<Option<TrialScore>> =
                trials.iter().map(|t| t.per_method[mi].as_ref().ok().map(|f| f.ungated.clone())).collect();
            let failures = gated.iter().filter(|g| g.is_none()).count();
            let agg = accuracy_and_rmse(&gated, truth.len());
            for (i, &angle) in truth.iter().enumerate() {
                rows.push(DoaRow {
                    snr_db: snr,
                    estimator: m.tag().to_string(),
                    angle_deg: angle.to_degrees(),
                    accuracy: agg.accuracy,
                    angle_accuracy: agg.per_angle_accuracy[i],
                    rmse_deg: agg.rmse_deg[i],
                    rmse_all_deg: ungated_rmse_deg(&ungated, i),
                    crlb_deg: bound[i],
                    trials: n,
                    failures,
                    candidates_min: cmin,
                    candidates_max: cmax,
                });
            }
        }
        log::info!("doa {snr} dB done");
    }

    let mut summary = CsvWriter::create(
        &cfg.out_dir.join(SUMMARY_FILE),
        &[
            "snr_db",
            "estimator",
            "angle_deg",
            "accuracy",
            "angle_accuracy",
            "rmse_deg",
            "rmse_all_deg",
            "crlb_deg",
            "trials",
            "failures",
            "candidates_min",
            "candidates_max",
        ],
    )?;
    for r in &rows {
        summary.row(&[
            Cell::F(r.snr_db),
            Cell::S(&r.estimator),
            Cell::F(r.angle_deg),
            Cell::F(r.accuracy),
            Cell::F(r.angle_accuracy),
            Cell::F(r.rmse_deg),
            Cell::F(r.rmse_all_deg),
            Cell::F(r.crlb_deg),
            Cell::from(r.trials),
            Cell::from(r.failures),
            Cell::from(r.candidates_min),
            Cell::from(r.candidates_max),
        ])?;
    }
    Ok(DoaReport {
        rows,
        summary_csv: summary.finish()?,
        trials_csv: trials_csv.finish()?,
        candidates_csv: cands_csv.finish()?,
    })
}
