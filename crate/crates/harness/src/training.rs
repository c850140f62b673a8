//! Dataset generation and training of the counting networks.

use std::path::PathBuf;

use h2ad_core::signal::mix_seed;
use h2ad_core::Result;
use h2ad_nn::dataset::{generate, LabeledDataset, SplitTag, SweepConfig};
use h2ad_nn::estimator::ModelKind;
use h2ad_nn::network::Network;
use h2ad_nn::train::{train, TrainParams, TrainReport};

use crate::config::ExperimentConfig;
use crate::csv::{Cell, CsvWriter};
use crate::number::model_path;

pub const LOSS_FILE: &str = "train_loss.csv";
pub const DATASET_FILE: &str = "dataset.csv";

/// Stream ids keeping training scenes and network init apart from the
/// evaluation trials.
const DATASET_STREAM: u64 = 0x7472_6169_6e00;
const INIT_STREAM: u64 = 0x696e_6974_0000;

pub fn sweep(cfg: &ExperimentConfig) -> SweepConfig {
    SweepConfig {
        group_sizes: cfg.counting_groups.clone(),
        snapshots: cfg.snapshots,
        max_sources: cfg.train.max_sources,
        snr_db: cfg.train.snr_db.clone(),
        trials_per_cell: cfg.train.trials_per_cell,
        val_fraction: cfg.train.val_fraction,
        test_fraction: 0.0,
        angle_limit_deg: cfg.angle_limit_deg,
        min_separation_deg: cfg.min_separation_deg,
        seed: mix_seed(cfg.seed, DATASET_STREAM),
    }
}

pub fn enabled_models(cfg: &ExperimentConfig) -> Vec<ModelKind> {
    let e = &cfg.estimators;
    ModelKind::ALL
        .into_iter()
        .filter(|k| match k {
            ModelKind::Dense => e.dnn,
            ModelKind::Fcnn => e.fcnn,
            ModelKind::Cnn => e.cnn,
        })
        .collect()
}

pub fn build_network(cfg: &ExperimentConfig, kind: ModelKind) -> Result<Network> {
    let t = &cfg.train;
    let seed = mix_seed(cfg.seed, INIT_STREAM + kind as u64);
    let hidden = [t.hidden; 3];
    match kind {
        ModelKind::Dense => Network::dense(5, &hidden, t.max_sources, t.dropout, seed),
        ModelKind::Fcnn => Network::dense(4, &hidden, t.max_sources, t.dropout, seed),
        ModelKind::Cnn => Network::cnn(cfg.counting_groups.iter().sum(), t.max_sources, seed),
    }
}

pub fn train_params(cfg: &ExperimentConfig, kind: ModelKind) -> TrainParams {
    let t = &cfg.train;
    let (lr, epochs, decay_every) = match kind {
        ModelKind::Cnn => (t.cnn_lr, t.cnn_epochs, t.cnn_decay_every),
        _ => (t.dense_lr, t.dense_epochs, t.dense_decay_every),
    };
    TrainParams {
        lr,
        epochs,
        decay_every,
        batch: t.batch,
        seed: mix_seed(cfg.seed, INIT_STREAM + 16 + kind as u64),
        ..Default::default()
    }
}

#[derive(Debug, Clone)]
pub struct TrainingOutput {
    pub models: Vec<(ModelKind, TrainReport, PathBuf)>,
    pub dataset_csv: PathBuf,
    pub loss_csv: PathBuf,
}

/// Trains one model on an existing dataset and saves it.
pub fn train_model(cfg: &ExperimentConfig, ds: &LabeledDataset, kind: ModelKind) -> Result<(TrainReport, PathBuf)> {
    let tr = ds.split(SplitTag::Train, kind.input())?;
    let va = ds.split(SplitTag::Val, kind.input())?;
    let mut net = build_network(cfg, kind)?;
    log::info!("training {} ({} parameters) on {} samples", kind.tag(), net.num_params(), tr.len());
    let report = train(&mut net, &tr, &va, &train_params(cfg, kind))?;
    log::info!(
        "{}: best epoch {}, validation accuracy {:.3}",
        kind.tag(),
        report.best_epoch,
        report.val_accuracy
    );
    let path = model_path(cfg, kind);
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    net.save(&path)?;
    Ok((report, path))
}

pub fn run_training(cfg: &ExperimentConfig) -> Result<TrainingOutput> {
    cfg.validate()?;
    let kinds = enabled_models(cfg);
    let dir = cfg.models_dir();
    std::fs::create_dir_all(&dir)?;
    let ds = generate(&sweep(cfg))?;
    log::info!("generated {} samples", ds.samples.len());
    let dataset_csv = dir.join(DATASET_FILE);
    ds.write_csv(&dataset_csv)?;

    let mut models = Vec::new();
    for kind in kinds {
        let (report, path) = train_model(cfg, &ds, kind)?;
        models.push((kind, report, path));
    }

    let mut w = CsvWriter::create(&cfg.out_dir.join(LOSS_FILE), &["model", "epoch", "train_loss", "val_loss"])?;
    for (kind, report, _) in &models {
        for (e, (t, v)) in report.curve.train.iter().zip(&report.curve.val).enumerate() {
            w.row(&[Cell::S(kind.tag()), Cell::from(e), Cell::F(*t), Cell::F(*v)])?;
        }
    }
    Ok(TrainingOutput {
        models,
        dataset_csv,
        loss_csv: w.finish()?,
    })
}
