//! Simulated eigenvalue spectra labelled with their source count.
//!
//! Each sample is one scene observed by fully digital groups; the groups'
//! outputs are stacked and the eigenvalues of the joint sample covariance
//! (descending, one per antenna) are stored.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use h2ad_core::array::ArrayConfig;
use h2ad_core::signal::{generate_all_groups, mix_seed, stack_groups, Combining, SourceScene};
use h2ad_core::spectral::covariance_eigenvalues;

use crate::features::{extract_features, log_spectrum};
use crate::train::Split;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

impl SplitTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Val => "val",
            SplitTag::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitTag::Train),
            "val" => Ok(SplitTag::Val),
            "test" => Ok(SplitTag::Test),
            _ => Err(Error::Input(format!("unknown split tag {s:?}"))),
        }
    }
}

/// What a model consumes from a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    /// The five summary statistics.
    Features,
    /// The four statistics without the entropy.
    FeaturesNoEntropy,
    /// Log-eigenvalues, descending.
    LogSpectrum,
}

impl InputKind {
    pub fn transform(self, eigenvalues: &[f64]) -> Result<Vec<f64>> {
        match self {
            InputKind::Features => Ok(extract_features(eigenvalues)?.truncated(5)),
            InputKind::FeaturesNoEntropy => Ok(extract_features(eigenvalues)?.truncated(4)),
            InputKind::LogSpectrum => Ok(log_spectrum(eigenvalues)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Descending eigenvalues of the joint covariance.
    pub eigenvalues: Vec<f64>,
    pub sources: usize,
    pub snr_db: f64,
    pub split: SplitTag,
}

impl Sample {
    /// Class index: source counts `1..=A_max` map to `0..A_max`.
    pub fn class(&self) -> usize {
        self.sources - 1
    }
}

pub fn one_hot(class: usize, classes: usize) -> Vec<f64> {
    (0..classes).map(|c| if c == class { 1.0 } else { 0.0 }).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub group_sizes: Vec<usize>,
    pub snapshots: usize,
    pub max_sources: usize,
    pub snr_db: Vec<f64>,
    pub trials_per_cell: usize,
    /// Fractions of each cell's trials tagged `val` and `test`; the rest train.
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub angle_limit_deg: f64,
    pub min_separation_deg: f64,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            group_sizes: vec![29, 31, 37],
            snapshots: 200,
            max_sources: 4,
            snr_db: (0..=10).map(|i| -20.0 + 2.0 * i as f64).collect(),
            trials_per_cell: 200,
            val_fraction: 0.2,
            test_fraction: 0.0,
            angle_limit_deg: 60.0,
            min_separation_deg: 10.0,
            seed: 1,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_sources < 2 {
            return Err(Error::Config("max_sources must be at least 2".into()));
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("SNR list must be non-empty and finite".into()));
        }
        if self.trials_per_cell == 0 || self.snapshots == 0 || self.group_sizes.is_empty() {
            return Err(Error::Config("trials, snapshots and groups must be non-empty".into()));
        }
        let f = self.val_fraction + self.test_fraction;
        if self.val_fraction < 0.0 || self.test_fraction < 0.0 || f >= 1.0 {
            return Err(Error::Config("split fractions must be non-negative and sum below 1".into()));
        }
        if !(self.angle_limit_deg > 0.0 && self.angle_limit_deg < 90.0) || self.min_separation_deg < 0.0 {
            return Err(Error::Config("angle limit must lie in (0, 90) degrees".into()));
        }
        Ok(())
    }

    pub fn array(&self) -> Result<ArrayConfig> {
        ArrayConfig::digital_groups(self.group_sizes.clone())
    }

    pub fn num_antennas(&self) -> usize {
        self.group_sizes.iter().sum()
    }
}

/// `count` angles (radians, ascending) in `±limit` with pairwise gap of at
/// least `min_sep`, by rejection sampling.
pub fn random_angles<R: Rng>(rng: &mut R, count: usize, limit_deg: f64, min_sep_deg: f64) -> Result<Vec<f64>> {
    for _ in 0..1000 {
        let mut a: Vec<f64> = (0..count).map(|_| rng.gen_range(-limit_deg..limit_deg)).collect();
        a.sort_by(f64::total_cmp);
        if a.windows(2).all(|w| w[1] - w[0] >= min_sep_deg) {
            return Ok(a.into_iter().map(f64::to_radians).collect());
        }
    }
    Err(Error::Config(format!(
        "could not place {count} sources {min_sep_deg} deg apart within ±{limit_deg} deg after 1000 tries"
    )))
}

/// Eigenvalues of the stacked-group covariance for one scene.
pub fn scene_eigenvalues(cfg: &ArrayConfig, scene: &SourceScene) -> Result<Vec<f64>> {
    let groups = generate_all_groups(cfg, scene, Combining::FullyDigital)?;
    covariance_eigenvalues(&stack_groups(&groups)?)
}

/// One random scene with `sources` sources at the given SNR.
pub fn simulate_sample(sweep: &SweepConfig, cfg: &ArrayConfig, sources: usize, snr_db: f64, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let angles = random_angles(&mut rng, sources, sweep.angle_limit_deg, sweep.min_separation_deg)?;
    let scene = SourceScene::with_snr_db(angles, snr_db, sweep.snapshots, rng.gen())?;
    scene_eigenvalues(cfg, &scene)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub samples: Vec<Sample>,
    pub sweep: SweepConfig,
    pub config_hash: String,
}

pub fn generate(sweep: &SweepConfig) -> Result<LabeledDataset> {
    sweep.validate()?;
    let cfg = sweep.array()?;
    let n = sweep.trials_per_cell;
    let n_val = (n as f64 * sweep.val_fraction).round() as usize;
    let n_test = (n as f64 * sweep.test_fraction).round() as usize;
    let n_train = n.saturating_sub(n_val + n_test);
    let mut samples = Vec::with_capacity(sweep.max_sources * sweep.snr_db.len() * n);
    for a in 1..=sweep.max_sources {
        for (si, &snr) in sweep.snr_db.iter().enumerate() {
            for t in 0..n {
                let cell = ((a as u64) << 48) | ((si as u64) << 24) | t as u64;
                let eigenvalues = simulate_sample(sweep, &cfg, a, snr, mix_seed(sweep.seed, cell))?;
                let split = if t < n_train {
                    SplitTag::Train
                } else if t < n_train + n_val {
                    SplitTag::Val
                } else {
                    SplitTag::Test
                };
                samples.push(Sample {
                    eigenvalues,
                    sources: a,
                    snr_db: snr,
                    split,
                });
            }
        }
    }
    Ok(LabeledDataset {
        samples,
        config_hash: cfg.fingerprint(),
        sweep: sweep.clone(),
    })
}

impl LabeledDataset {
    pub fn classes(&self) -> usize {
        self.sweep.max_sources
    }

    pub fn split(&self, tag: SplitTag, kind: InputKind) -> Result<Split> {
        let mut out = Split::default();
        for s in self.samples.iter().filter(|s| s.split == tag) {
            out.inputs.push(kind.transform(&s.eigenvalues)?);
            out.labels.push(s.class());
        }
        Ok(out)
    }

    pub fn class_counts(&self, tag: SplitTag) -> Vec<usize> {
        let mut c = vec![0; self.classes()];
        for s in self.samples.iter().filter(|s| s.split == tag) {
            c[s.class()] += 1;
        }
        c
    }

    /// Writes the CSV and a `<path>.meta` sidecar; returns the sidecar path.
    pub fn write_csv(&self, path: &Path) -> Result<PathBuf> {
        let m = self.samples.first().map_or(0, |s| s.eigenvalues.len());
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        let mut header: Vec<String> = (0..m).map(|i| format!("feat_{i}")).collect();
        header.extend(["snr_db", "split", "label"].map(String::from));
        writeln!(w, "{}", header.join(","))?;
        let mut line = String::new();
        for s in &self.samples {
            line.clear();
            for v in &s.eigenvalues {
                write!(line, "{v:e},").expect("string write");
            }
            writeln!(w, "{line}{},{},{}", s.snr_db, s.split.as_str(), s.sources)?;
        }
        w.flush()?;

        let meta = sidecar_path(path);
        let sw = &self.sweep;
        let snrs: Vec<String> = sw.snr_db.iter().map(|s| s.to_string()).collect();
        let groups: Vec<String> = sw.group_sizes.iter().map(|g| g.to_string()).collect();
        std::fs::write(
            &meta,
            format!(
                "seed={}\ngroup_sizes={}\nsnapshots={}\nmax_sources={}\nsnr_db={}\ntrials_per_cell={}\n\
                 val_fraction={}\ntest_fraction={}\nangle_limit_deg={}\nmin_separation_deg={}\nconfig_hash={}\n",
                sw.seed,
                groups.join(","),
                sw.snapshots,
                sw.max_sources,
                snrs.join(","),
                sw.trials_per_cell,
                sw.val_fraction,
                sw.test_fraction,
                sw.angle_limit_deg,
                sw.min_separation_deg,
                self.config_hash
            ),
        )?;
        Ok(meta)
    }

    /// Reads a dataset written by [`write_csv`](Self::write_csv), sidecar included.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let meta = std::fs::read_to_string(sidecar_path(path))?;
        let mut sweep = SweepConfig::default();
        let mut config_hash = String::new();
        for line in meta.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Input(format!("bad sidecar line {line:?}")))?;
            let bad = || Error::Input(format!("bad sidecar value for {k}"));
            match k {
                "seed" => sweep.seed = v.parse().map_err(|_| bad())?,
                "group_sizes" => sweep.group_sizes = parse_list(v)?,
                "snapshots" => sweep.snapshots = v.parse().map_err(|_| bad())?,
                "max_sources" => sweep.max_sources = v.parse().map_err(|_| bad())?,
                "snr_db" => sweep.snr_db = parse_list(v)?,
                "trials_per_cell" => sweep.trials_per_cell = v.parse().map_err(|_| bad())?,
                "val_fraction" => sweep.val_fraction = v.parse().map_err(|_| bad())?,
                "test_fraction" => sweep.test_fraction = v.parse().map_err(|_| bad())?,
                "angle_limit_deg" => sweep.angle_limit_deg = v.parse().map_err(|_| bad())?,
                "min_separation_deg" => sweep.min_separation_deg = v.parse().map_err(|_| bad())?,
                "config_hash" => config_hash = v.to_string(),
                _ => {}
            }
        }

        let mut lines = BufReader::new(std::fs::File::open(path)?).lines();
        let header = lines.next().ok_or_else(|| Error::Input("empty dataset file".into()))??;
        let cols: Vec<&str> = header.split(',').collect();
        let m = cols.iter().filter(|c| c.starts_with("feat_")).count();
        if cols.len() != m + 3 || cols[m..] != ["snr_db", "split", "label"] {
            return Err(Error::Input("unexpected dataset header".into()));
        }
        let mut samples = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != m + 3 {
                return Err(Error::Input(format!("row {} has {} fields", i + 1, f.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Input(format!("bad number {s:?} in row {}", i + 1)));
            samples.push(Sample {
                eigenvalues: f[..m].iter().map(|s| num(s)).collect::<Result<_>>()?,
                snr_db: num(f[m])?,
                split: SplitTag::parse(f[m + 1])?,
                sources: f[m + 2]
                    .parse()
                    .map_err(|_| Error::Input(format!("bad label in row {}", i + 1)))?,
            });
        }
        Ok(Self {
            samples,
            sweep,
            config_hash,
        })
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".meta");
    PathBuf::from(p)
}

fn parse_list<T: std::str::FromStr>(v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(|x| x.trim().parse().map_err(|_| Error::Input(format!("bad list entry {x:?}"))))
        .collect()
}
