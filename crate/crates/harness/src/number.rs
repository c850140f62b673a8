//! Source-number sensing sweep: EDC and the trained networks on the same
//! simulated scenes.

use std::path::PathBuf;

use h2ad_core::array::ArrayConfig;
use h2ad_core::edc::{estimate_count_from_eigenvalues, EdcEstimate, Label};
use h2ad_core::signal::{generate_all_groups, stack_groups, Combining, SourceScene};
use h2ad_core::spectral::covariance_eigenvalues;
use h2ad_core::{Error, Result};
use h2ad_nn::dataset::random_angles;
use h2ad_nn::estimator::{CountEstimator, ModelKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;
use crate::csv::{trial_row, Cell, CsvWriter, TRIAL_HEADER};
use crate::pool::parallel_map;
use crate::{trial_seed, Experiment};

pub const TRIALS_FILE: &str = "number_sensing_trials.csv";
pub const SUMMARY_FILE: &str = "number_sensing.csv";
pub const SCATTER_FILE: &str = "eigen_scatter.csv";

/// One simulated scene seen by every estimator.
pub struct CountingTrial {
    pub per_group: Vec<Vec<f64>>,
    pub joint: Vec<f64>,
}

pub fn simulate_trial(cfg: &ExperimentConfig, array: &ArrayConfig, snr_db: f64, seed: u64) -> Result<CountingTrial> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let angles = random_angles(&mut rng, cfg.count_sources, cfg.angle_limit_deg, cfg.min_separation_deg)?;
    let scene = SourceScene::with_snr_db(angles, snr_db, cfg.snapshots, rng.gen())?;
    let groups = generate_all_groups(array, &scene, Combining::FullyDigital)?;
    let per_group = groups.iter().map(covariance_eigenvalues).collect::<Result<_>>()?;
    let joint = covariance_eigenvalues(&stack_groups(&groups)?)?;
    Ok(CountingTrial { per_group, joint })
}

pub enum CountEstimatorKind {
    Edc,
    Net(CountEstimator),
}

pub struct NamedEstimator {
    pub tag: &'static str,
    pub kind: CountEstimatorKind,
}

impl NamedEstimator {
    fn estimate(&self, cfg: &ExperimentConfig, trial: &CountingTrial) -> Result<usize> {
        match &self.kind {
            CountEstimatorKind::Edc => Ok(edc(cfg, trial)?.count),
            CountEstimatorKind::Net(net) => net.estimate(&trial.joint),
        }
    }
}

fn edc(cfg: &ExperimentConfig, trial: &CountingTrial) -> Result<EdcEstimate> {
    let groups: Vec<&[f64]> = trial.per_group.iter().map(Vec::as_slice).collect();
    estimate_count_from_eigenvalues(&groups, &cfg.edc)
}

pub fn model_path(cfg: &ExperimentConfig, kind: ModelKind) -> PathBuf {
    cfg.models_dir().join(kind.file_name())
}

/// Enabled estimators in canonical order. Missing or mismatched model files
/// are a configuration error naming the command that produces them.
pub fn load_estimators(cfg: &ExperimentConfig) -> Result<Vec<NamedEstimator>> {
    let e = &cfg.estimators;
    let mut out = Vec::new();
    if e.edc {
        out.push(NamedEstimator {
            tag: "edc",
            kind: CountEstimatorKind::Edc,
        });
    }
    let m: usize = cfg.counting_groups.iter().sum();
    for (on, kind) in [(e.dnn, ModelKind::Dense), (e.fcnn, ModelKind::Fcnn), (e.cnn, ModelKind::Cnn)] {
        if !on {
            continue;
        }
        let path = model_path(cfg, kind);
        if !path.exists() {
            return Err(Error::Config(format!(
                "model file {} not found; run `h2ad train` with the same --config/--out first, \
                 or disable it under [estimators]",
                path.display()
            )));
        }
        let est = CountEstimator::load(&path)?;
        if est.kind != kind {
            return Err(Error::Config(format!("{} does not hold a {} model", path.display(), kind.tag())));
        }
        if kind == ModelKind::Cnn && est.network.input_size()? != m {
            return Err(Error::Config(format!(
                "{} expects {} eigenvalues but the array has {m} antennas; retrain",
                path.display(),
                est.network.input_size()?
            )));
        }
        if est.network.classes()? < cfg.count_sources {
            return Err(Error::Config(format!("{} cannot output {} sources", path.display(), cfg.count_sources)));
        }
        out.push(NamedEstimator {
            tag: kind.tag(),
            kind: CountEstimatorKind::Net(est),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyRow {
    pub snr_db: f64,
    pub estimator: String,
    pub accuracy: f64,
    pub trials: usize,
    pub failures: usize,
}

#[derive(Debug, Clone)]
pub struct NumberSensingReport {
    pub rows: Vec<AccuracyRow>,
    pub summary_csv: PathBuf,
    pub trials_csv: PathBuf,
    pub scatter_csv: PathBuf,
}

impl NumberSensingReport {
    pub fn accuracy(&self, estimator: &str, snr_db: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.estimator == estimator && (r.snr_db - snr_db).abs() < 1e-9)
            .map(|r| r.accuracy)
    }
}

/// `Ok(estimate)` or the failure, per estimator.
type TrialOutcome = Vec<std::result::Result<usize, String>>;

pub fn run_number_sensing(cfg: &ExperimentConfig) -> Result<NumberSensingReport> {
    cfg.validate()?;
    let estimators = load_estimators(cfg)?;
    let array = ArrayConfig::digital_groups(cfg.counting_groups.clone())?;
    let snrs = cfg.number_sweep.points();
    let n = cfg.trials;
    let workers = cfg.worker_count();

    let out = &cfg.out_dir;
    let mut trials_csv = CsvWriter::create(
        &out.join(TRIALS_FILE),
        &TRIAL_HEADER,
    )?;
    let mut scatter = CsvWriter::create(
        &out.join(SCATTER_FILE),
        &["snr_db", "group", "index", "eigenvalue", "z", "lifted", "cluster"],
    )?;
    let mut rows = Vec::new();

    for (si, &snr) in snrs.iter().enumerate() {
        let outcomes: Vec<TrialOutcome> = parallel_map(n, workers, |t| {
            let seed = trial_seed(cfg.seed, Experiment::NumberSensing, si, t);
            match simulate_trial(cfg, &array, snr, seed) {
                Ok(trial) => estimators
                    .iter()
                    .map(|e| e.estimate(cfg, &trial).map_err(|err| err.to_string()))
                    .collect(),
                Err(err) => vec![Err(format!("simulation: {err}")); estimators.len()],
            }
        });

        for (t, outcome) in outcomes.iter().enumerate() {
            for (e, r) in estimators.iter().zip(outcome) {
                let mut emit = |metric, value| trial_row(&mut trials_csv, "number_sensing", snr, t, e.tag, metric, value);
                match r {
                    Ok(a) => {
                        emit("estimate", Cell::from(*a))?;
                        emit("correct", Cell::from(usize::from(*a == cfg.count_sources)))?;
                    }
                    Err(msg) => {
                        log::warn!("snr {snr} dB trial {t} {}: {msg}", e.tag);
                        emit("failure", Cell::U(1))?;
                    }
                }
            }
        }

        for (ei, e) in estimators.iter().enumerate() {
            let failures = outcomes.iter().filter(|o| o[ei].is_err()).count();
            let correct = outcomes
                .iter()
                .filter(|o| matches!(o[ei], Ok(a) if a == cfg.count_sources))
                .count();
            rows.push(AccuracyRow {
                snr_db: snr,
                estimator: e.tag.to_string(),
                accuracy: correct as f64 / n as f64,
                trials: n,
                failures,
            });
        }

        // eigenvalue scatter of the first trial at each point
        let seed = trial_seed(cfg.seed, Experiment::NumberSensing, si, 0);
        if let Ok(trial) = simulate_trial(cfg, &array, snr, seed) {
            if let Ok(est) = edc(cfg, &trial) {
                write_scatter(&mut scatter, snr, &trial, &est)?;
            }
        }
        log::info!("number sensing {snr} dB done");
    }

    let mut summary = CsvWriter::create(
        &out.join(SUMMARY_FILE),
        &["snr_db", "estimator", "accuracy", "trials", "failures"],
    )?;
    for r in &rows {
        summary.row(&[
            Cell::F(r.snr_db),
            Cell::S(&r.estimator),
            Cell::F(r.accuracy),
            Cell::from(r.trials),
            Cell::from(r.failures),
        ])?;
    }
    Ok(NumberSensingReport {
        rows,
        summary_csv: summary.finish()?,
        trials_csv: trials_csv.finish()?,
        scatter_csv: scatter.finish()?,
    })
}

/// Cluster `-1` marks DBSCAN outliers.
fn write_scatter(w: &mut CsvWriter, snr: f64, trial: &CountingTrial, est: &EdcEstimate) -> Result<()> {
    for (p, label) in est.points.iter().zip(&est.labeling.labels) {
        let cluster = match label {
            Label::Noise => -1,
            Label::Cluster(c) => *c as i64,
        };
        w.row(&[
            Cell::F(snr),
            Cell::from(p.group),
            Cell::from(p.index),
            Cell::F(trial.per_group[p.group][p.index]),
            Cell::F(p.x),
            Cell::F(p.y),
            Cell::I(cluster),
        ])?;
    }
    Ok(())
}
