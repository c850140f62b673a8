//! Bound sweep over SNR and snapshot count, plus the orthogonality profile.

use std::path::PathBuf;

use h2ad_core::crlb::{crlb_from_fim, fim, orthogonality_closed_form, orthogonality_profile};
use h2ad_core::signal::SourceScene;
use h2ad_core::{Error, Result};

use crate::config::ExperimentConfig;
use crate::csv::{Cell, CsvWriter};
use crate::doa::{doa_array, truth};

pub const SUMMARY_FILE: &str = "crlb.csv";
pub const ORTHOGONALITY_FILE: &str = "orthogonality.csv";

/// Largest group size in the orthogonality table.
pub const ORTHOGONALITY_MAX_N: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct CrlbRow {
    pub snr_db: f64,
    pub snapshots: usize,
    pub angle_deg: f64,
    pub crlb_deg2: f64,
    pub crlb_diag_deg2: f64,
}

#[derive(Debug, Clone)]
pub struct CrlbReport {
    pub rows: Vec<CrlbRow>,
    pub csv: PathBuf,
    pub orthogonality_csv: PathBuf,
}

pub fn run_crlb_sweep(cfg: &ExperimentConfig) -> Result<CrlbReport> {
    cfg.validate()?;
    let array = doa_array(cfg)?;
    let truth = truth(cfg);
    let mut rows = Vec::new();
    for snr in cfg.crlb_sweep.points() {
        let scene = SourceScene::with_snr_db(truth.clone(), snr, cfg.snapshots, 0)?;
        let f = fim(&array, &scene)?;
        for &l in &cfg.crlb_snapshots {
            let full = crlb_from_fim(&f, l, false, array.fingerprint())?;
            let diag = crlb_from_fim(&f, l, true, array.fingerprint())?;
            for (i, &a) in truth.iter().enumerate() {
                rows.push(CrlbRow {
                    snr_db: snr,
                    snapshots: l,
                    angle_deg: a.to_degrees(),
                    crlb_deg2: full.bounds[i].to_degrees().to_degrees(),
                    crlb_diag_deg2: diag.bounds[i].to_degrees().to_degrees(),
                });
            }
        }
    }
    let mut w = CsvWriter::create(
        &cfg.out_dir.join(SUMMARY_FILE),
        &["snr_db", "snapshots", "angle_deg", "crlb_deg2", "crlb_diag_deg2"],
    )?;
    for r in &rows {
        w.row(&[
            Cell::F(r.snr_db),
            Cell::from(r.snapshots),
            Cell::F(r.angle_deg),
            Cell::F(r.crlb_deg2),
            Cell::F(r.crlb_diag_deg2),
        ])?;
    }
    let csv = w.finish()?;

    if truth.len() < 2 {
        return Err(Error::Config("the orthogonality table needs two source angles".into()));
    }
    let d = array.spacing() / array.wavelength();
    let sizes: Vec<usize> = (1..=ORTHOGONALITY_MAX_N).collect();
    let profile = orthogonality_profile(d, truth[0], truth[1], &sizes);
    let mut w = CsvWriter::create(
        &cfg.out_dir.join(ORTHOGONALITY_FILE),
        &["n", "theta_p_deg", "theta_r_deg", "inner_product", "closed_form"],
    )?;
    for (&n, &p) in sizes.iter().zip(&profile) {
        w.row(&[
            Cell::from(n),
            Cell::F(truth[0].to_degrees()),
            Cell::F(truth[1].to_degrees()),
            Cell::F(p),
            Cell::F(orthogonality_closed_form(d, truth[0], truth[1], n)),
        ])?;
    }
    Ok(CrlbReport {
        rows,
        csv,
        orthogonality_csv: w.finish()?,
    })
}
