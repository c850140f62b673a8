//! Experiment configuration: profile defaults, overridden by a plain-text
//! `key = value` file with `[section]` headers, overridden by CLI flags.

use std::path::{Path, PathBuf};

use h2ad_core::edc::EdcParams;
use h2ad_core::fusion::OmcParams;
use h2ad_core::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Smoke,
    Paper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnrSweep {
    pub start_db: f64,
    pub stop_db: f64,
    pub step_db: f64,
}

impl SnrSweep {
    pub fn new(start_db: f64, stop_db: f64, step_db: f64) -> Self {
        Self { start_db, stop_db, step_db }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if !(self.step_db > 0.0) || !self.start_db.is_finite() || !self.stop_db.is_finite() {
            return Err(Error::Config(format!("[{name}] needs finite bounds and snr_step_db > 0")));
        }
        if self.stop_db < self.start_db {
            return Err(Error::Config(format!("[{name}] snr_stop_db is below snr_start_db")));
        }
        Ok(())
    }

    /// Inclusive grid; points are computed from the index so no drift builds up.
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop_db - self.start_db) / self.step_db + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start_db + i as f64 * self.step_db).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimators {
    pub edc: bool,
    pub dnn: bool,
    pub fcnn: bool,
    pub cnn: bool,
    pub omc: bool,
    pub wgmd: bool,
    pub wlmd: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub snr_db: Vec<f64>,
    pub trials_per_cell: usize,
    pub max_sources: usize,
    pub val_fraction: f64,
    pub dense_epochs: usize,
    pub dense_lr: f64,
    pub dense_decay_every: usize,
    pub cnn_epochs: usize,
    pub cnn_lr: f64,
    pub cnn_decay_every: usize,
    pub batch: usize,
    pub hidden: usize,
    pub dropout: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub profile: Profile,
    pub seed: u64,
    pub trials: usize,
    pub out_dir: PathBuf,
    /// Trained model files; `<out>/models` when unset.
    pub model_dir: Option<PathBuf>,
    pub workers: usize,

    /// Fully digital groups used for source counting.
    pub counting_groups: Vec<usize>,
    pub count_sources: usize,
    pub angle_limit_deg: f64,
    pub min_separation_deg: f64,
    pub snapshots: usize,
    pub number_sweep: SnrSweep,
    pub edc: EdcParams,

    pub subarrays: usize,
    pub antennas_per_subarray: Vec<usize>,
    pub doa_angles_deg: Vec<f64>,
    pub doa_sweep: SnrSweep,
    pub gate_deg: f64,
    pub omc: OmcParams,

    pub crlb_sweep: SnrSweep,
    pub crlb_snapshots: Vec<usize>,

    /// Coprime antenna-per-subarray sets for the complexity benchmark.
    pub complexity_sets: Vec<Vec<usize>>,
    pub complexity_repeats: usize,
    pub complexity_snr_db: f64,

    pub estimators: Estimators,
    pub train: TrainConfig,
}

impl ExperimentConfig {
    pub fn for_profile(profile: Profile) -> Self {
        let smoke = profile == Profile::Smoke;
        Self {
            profile,
            seed: 1,
            trials: if smoke { 20 } else { 500 },
            out_dir: PathBuf::from("results"),
            model_dir: None,
            workers: 0,
            counting_groups: vec![29, 31, 37],
            count_sources: 3,
            angle_limit_deg: 60.0,
            min_separation_deg: 10.0,
            snapshots: 200,
            number_sweep: if smoke { SnrSweep::new(-20.0, 0.0, 10.0) } else { SnrSweep::new(-20.0, 0.0, 2.0) },
            edc: EdcParams::default(),
            subarrays: 16,
            antennas_per_subarray: vec![7, 13, 17],
            doa_angles_deg: vec![11.0, 23.0],
            doa_sweep: if smoke { SnrSweep::new(-10.0, 0.0, 5.0) } else { SnrSweep::new(-20.0, 10.0, 2.0) },
            gate_deg: 1.0,
            omc: OmcParams::default(),
            crlb_sweep: SnrSweep::new(-20.0, 10.0, if smoke { 5.0 } else { 1.0 }),
            crlb_snapshots: vec![200],
            complexity_sets: if smoke {
                vec![vec![3, 5, 7], vec![7, 11, 13], vec![13, 17, 19]]
            } else {
                vec![
                    vec![3, 5, 7],
                    vec![5, 7, 11],
                    vec![7, 11, 13],
                    vec![7, 13, 17],
                    vec![11, 13, 17],
                    vec![13, 17, 19],
                    vec![17, 19, 23],
                    vec![19, 23, 29],
                ]
            },
            complexity_repeats: if smoke { 5 } else { 50 },
            complexity_snr_db: 10.0,
            estimators: Estimators {
                edc: true,
                dnn: true,
                fcnn: true,
                cnn: true,
                omc: true,
                wgmd: true,
                wlmd: true,
            },
            train: TrainConfig {
                snr_db: if smoke {
                    vec![-20.0, -10.0, 0.0]
                } else {
                    // the three lowest points appear twice
                    vec![
                        -20.0, -20.0, -19.0, -19.0, -18.0, -18.0, -17.0, -16.0, -15.0, -14.0, -12.0, -10.0, -5.0, 0.0,
                    ]
                },
                trials_per_cell: if smoke { 10 } else { 176 },
                max_sources: 4,
                val_fraction: 0.2,
                dense_epochs: if smoke { 30 } else { 60 },
                dense_lr: 1e-2,
                dense_decay_every: 20,
                cnn_epochs: if smoke { 4 } else { 24 },
                cnn_lr: 0.1,
                cnn_decay_every: 8,
                batch: 32,
                hidden: 64,
                dropout: 0.2,
            },
        }
    }

    /// Profile defaults overridden by the file at `path`.
    pub fn load(profile: Profile, path: Option<&Path>) -> Result<Self> {
        let mut cfg = Self::for_profile(profile);
        if let Some(p) = path {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
            cfg.apply_text(&text)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut section = String::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(s) = line.strip_prefix('[') {
                section = s
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Config(format!("line {}: unterminated section header", n + 1)))?
                    .trim()
                    .to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(&section, k.trim(), v.trim())
                .map_err(|e| Error::Config(format!("line {}: [{section}] {}: {e}", n + 1, k.trim())))?;
        }
        Ok(())
    }

    fn set(&mut self, section: &str, key: &str, v: &str) -> std::result::Result<(), String> {
        match (section, key) {
            ("run", "seed") => self.seed = num(v)?,
            ("run", "trials") => self.trials = num(v)?,
            ("run", "out") => self.out_dir = PathBuf::from(v),
            ("run", "models") => self.model_dir = Some(PathBuf::from(v)),
            ("run", "workers") => self.workers = num(v)?,

            ("number_sensing", "groups") => self.counting_groups = list(v)?,
            ("number_sensing", "sources") => self.count_sources = num(v)?,
            ("number_sensing", "angle_limit_deg") => self.angle_limit_deg = num(v)?,
            ("number_sensing", "min_separation_deg") => self.min_separation_deg = num(v)?,
            ("number_sensing", "snapshots") => self.snapshots = num(v)?,
            ("number_sensing", "snr_start_db") => self.number_sweep.start_db = num(v)?,
            ("number_sensing", "snr_stop_db") => self.number_sweep.stop_db = num(v)?,
            ("number_sensing", "snr_step_db") => self.number_sweep.step_db = num(v)?,

            ("edc", "eps") => self.edc.eps = num(v)?,
            ("edc", "exponent" | "epsilon_exponent") => self.edc.exponent = num(v)?,
            ("edc", "min_pts") => self.edc.min_pts = if v == "auto" { None } else { Some(num(v)?) },

            ("doa", "subarrays") => self.subarrays = num(v)?,
            ("doa", "antennas_per_subarray") => self.antennas_per_subarray = list(v)?,
            ("doa", "angles_deg") => self.doa_angles_deg = list(v)?,
            ("doa", "snr_start_db") => self.doa_sweep.start_db = num(v)?,
            ("doa", "snr_stop_db") => self.doa_sweep.stop_db = num(v)?,
            ("doa", "snr_step_db") => self.doa_sweep.step_db = num(v)?,
            ("doa", "gate_deg") => self.gate_deg = num(v)?,

            ("omc", "radius_deg") => self.omc.radius_deg = num(v)?,
            ("omc", "decay") => self.omc.decay = num(v)?,
            ("omc", "eviction_floor") => self.omc.eviction_floor = num(v)?,
            ("omc", "merge_deg") => self.omc.merge_deg = num(v)?,

            ("crlb", "snr_start_db") => self.crlb_sweep.start_db = num(v)?,
            ("crlb", "snr_stop_db") => self.crlb_sweep.stop_db = num(v)?,
            ("crlb", "snr_step_db") => self.crlb_sweep.step_db = num(v)?,
            ("crlb", "snapshots") => self.crlb_snapshots = list(v)?,

            ("complexity", "sets") => {
                self.complexity_sets = v.split(';').map(|s| list(s)).collect::<std::result::Result<_, _>>()?
            }
            ("complexity", "repeats") => self.complexity_repeats = num(v)?,
            ("complexity", "snr_db") => self.complexity_snr_db = num(v)?,

            ("estimators", k) => {
                let on = flag(v)?;
                match k {
                    "edc" => self.estimators.edc = on,
                    "dnn" => self.estimators.dnn = on,
                    "fcnn" => self.estimators.fcnn = on,
                    "cnn" => self.estimators.cnn = on,
                    "omc" => self.estimators.omc = on,
                    "wgmd" => self.estimators.wgmd = on,
                    "wlmd" => self.estimators.wlmd = on,
                    _ => return Err("unknown estimator".into()),
                }
            }

            ("train", "snr_db") => self.train.snr_db = list(v)?,
            ("train", "trials_per_cell") => self.train.trials_per_cell = num(v)?,
            ("train", "max_sources") => self.train.max_sources = num(v)?,
            ("train", "val_fraction") => self.train.val_fraction = num(v)?,
            ("train", "dense_epochs") => self.train.dense_epochs = num(v)?,
            ("train", "dense_lr") => self.train.dense_lr = num(v)?,
            ("train", "dense_decay_every") => self.train.dense_decay_every = num(v)?,
            ("train", "cnn_epochs") => self.train.cnn_epochs = num(v)?,
            ("train", "cnn_lr") => self.train.cnn_lr = num(v)?,
            ("train", "cnn_decay_every") => self.train.cnn_decay_every = num(v)?,
            ("train", "batch") => self.train.batch = num(v)?,
            ("train", "hidden") => self.train.hidden = num(v)?,
            ("train", "dropout") => self.train.dropout = num(v)?,

            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        self.number_sweep.validate("number_sensing")?;
        self.doa_sweep.validate("doa")?;
        self.crlb_sweep.validate("crlb")?;
        let e = &self.estimators;
        if !(e.edc || e.dnn || e.fcnn || e.cnn) {
            return bad("enable at least one source-count estimator");
        }
        if !(e.omc || e.wgmd || e.wlmd) {
            return bad("enable at least one fusion method");
        }
        if self.count_sources == 0 || self.count_sources > self.train.max_sources {
            return bad("number_sensing.sources must lie in 1..=train.max_sources");
        }
        if self.doa_angles_deg.is_empty() || self.doa_angles_deg.iter().any(|a| a.abs() >= 90.0) {
            return bad("doa.angles_deg must be non-empty and inside (-90, 90)");
        }
        if self.complexity_sets.is_empty() || self.complexity_sets.iter().any(Vec::is_empty) {
            return bad("complexity sweep is empty");
        }
        if self.complexity_repeats == 0 || self.crlb_snapshots.is_empty() || self.crlb_snapshots.contains(&0) {
            return bad("complexity.repeats and crlb.snapshots must be positive");
        }
        if !(self.gate_deg > 0.0) || self.snapshots == 0 {
            return bad("gate and snapshots must be positive");
        }
        Ok(())
    }

    pub fn models_dir(&self) -> PathBuf {
        self.model_dir.clone().unwrap_or_else(|| self.out_dir.join("models"))
    }

    pub fn worker_count(&self) -> usize {
        if self.workers > 0 {
            self.workers
        } else {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        }
    }
}

fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse {v:?}"))
}

fn list<T: std::str::FromStr>(v: &str) -> std::result::Result<Vec<T>, String> {
    v.split(',').map(|x| num(x.trim())).collect()
}

fn flag(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("expected a boolean, got {v:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_overrides_profile() {
        let mut c = ExperimentConfig::for_profile(Profile::Smoke);
        c.apply_text(
            "# comment\n[run]\nseed = 9\ntrials = 3 # inline\n\n[doa]\nangles_deg = 5, -7.5\n\
             [complexity]\nsets = 3,5,7; 5,7,11\n[estimators]\ncnn = off\n[edc]\nmin_pts = 6\n",
        )
        .unwrap();
        assert_eq!((c.seed, c.trials), (9, 3));
        assert_eq!(c.doa_angles_deg, vec![5.0, -7.5]);
        assert_eq!(c.complexity_sets, vec![vec![3, 5, 7], vec![5, 7, 11]]);
        assert!(!c.estimators.cnn);
        assert_eq!(c.edc.min_pts, Some(6));
        c.validate().unwrap();
    }

    #[test]
    fn bad_input_is_a_config_error() {
        let mut c = ExperimentConfig::for_profile(Profile::Smoke);
        assert!(matches!(c.apply_text("[run]\nbogus = 1\n"), Err(Error::Config(_))));
        assert!(matches!(c.apply_text("[run]\ntrials = many\n"), Err(Error::Config(_))));
        assert!(matches!(c.apply_text("[run\n"), Err(Error::Config(_))));
        c.apply_text("[doa]\nsnr_step_db = 0\n").unwrap();
        assert!(matches!(c.validate(), Err(Error::Config(_))));

        let mut c = ExperimentConfig::for_profile(Profile::Smoke);
        c.complexity_sets.clear();
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::for_profile(Profile::Smoke);
        c.trials = 0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::for_profile(Profile::Smoke);
        c.apply_text("[estimators]\nomc = off\nwgmd = no\nwlmd = 0\n").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn sweep_grid_is_inclusive() {
        assert_eq!(SnrSweep::new(-20.0, 0.0, 2.0).points().len(), 11);
        assert_eq!(SnrSweep::new(-0.3, 0.3, 0.1).points().len(), 7);
        assert_eq!(SnrSweep::new(5.0, 5.0, 1.0).points(), vec![5.0]);
    }
}
