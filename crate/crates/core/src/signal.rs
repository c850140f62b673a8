//! Synthetic narrowband snapshots through the H²AD analog combining chain.
//!
//! Sources and noise are circular complex Gaussian. Randomness comes from
//! ChaCha20 streams derived from the scene seed: one stream for the source
//! matrix (shared by every group) and one per group for its noise, so
//! generating a single group reproduces exactly the matrix that
//! [`generate_all_groups`] produces for it.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::array::{combining_matrix, steering, ArrayConfig};
use crate::{CMatrix, Error, Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct SourceScene {
    pub angles: Vec<f64>,
    pub signal_power: f64,
    pub noise_power: f64,
    pub snapshots: usize,
    pub seed: u64,
}

impl SourceScene {
    pub fn new(
        angles: Vec<f64>,
        signal_power: f64,
        noise_power: f64,
        snapshots: usize,
        seed: u64,
    ) -> Result<Self> {
        if snapshots == 0 {
            return Err(Error::Input("snapshot count must be positive".into()));
        }
        if !(signal_power.is_finite() && signal_power >= 0.0) {
            return Err(Error::Input("signal power must be finite and non-negative".into()));
        }
        if !(noise_power.is_finite() && noise_power >= 0.0) {
            return Err(Error::Input("noise power must be finite and non-negative".into()));
        }
        for (i, a) in angles.iter().enumerate() {
            if !a.is_finite() || a.abs() > std::f64::consts::FRAC_PI_2 {
                return Err(Error::Input(format!("angle {a} outside [-pi/2, pi/2]")));
            }
            if angles[..i].contains(a) {
                return Err(Error::Input("source angles must be pairwise distinct".into()));
            }
        }
        Ok(Self {
            angles,
            signal_power,
            noise_power,
            snapshots,
            seed,
        })
    }

    /// Unit noise power, signal power set from the per-source SNR in dB.
    pub fn with_snr_db(angles: Vec<f64>, snr_db: f64, snapshots: usize, seed: u64) -> Result<Self> {
        Self::new(angles, 10f64.powf(snr_db / 10.0), 1.0, snapshots, seed)
    }

    pub fn num_sources(&self) -> usize {
        self.angles.len()
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * (self.signal_power / self.noise_power).log10()
    }
}

/// Whether RF chains see analog-combined subarray sums or every antenna.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Combining {
    /// `K` outputs per group, `B_{A,q}^H x` with the `1/√M_q` normalization.
    #[default]
    Analog,
    /// `N_q` outputs per group; diagnostic mode and the counting front end.
    FullyDigital,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    pub data: CMatrix,
    pub group: usize,
}

impl SnapshotMatrix {
    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn snapshots(&self) -> usize {
        self.data.ncols()
    }
}

/// SplitMix64 finalizer; mixes a stream or trial index into a base seed.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const SOURCE_STREAM: u64 = u64::MAX;

fn gaussian_matrix(rows: usize, cols: usize, power: f64, rng: &mut ChaCha20Rng) -> CMatrix {
    let sd = (power / 2.0).sqrt();
    // column-major fill, matching nalgebra storage
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re * sd, im * sd)
    })
}

fn output_rows(cfg: &ArrayConfig, q: usize, mode: Combining) -> usize {
    match mode {
        Combining::Analog => cfg.subarrays(),
        Combining::FullyDigital => cfg.group_size(q),
    }
}

fn check_order(cfg: &ArrayConfig, scene: &SourceScene, mode: Combining) -> Result<()> {
    let a = scene.num_sources();
    let dim = (0..cfg.num_groups())
        .map(|q| output_rows(cfg, q, mode))
        .min()
        .unwrap_or(0);
    if a > dim {
        return Err(Error::ModelOrder(format!(
            "{a} sources exceed the {dim}-dimensional group output"
        )));
    }
    Ok(())
}

fn source_matrix(scene: &SourceScene) -> CMatrix {
    let mut rng = ChaCha20Rng::seed_from_u64(mix_seed(scene.seed, SOURCE_STREAM));
    gaussian_matrix(scene.num_sources(), scene.snapshots, scene.signal_power, &mut rng)
}

fn group_snapshots(
    cfg: &ArrayConfig,
    scene: &SourceScene,
    q: usize,
    mode: Combining,
    sources: &CMatrix,
) -> Result<SnapshotMatrix> {
    let n = cfg.group_size(q);
    let mut manifold = CMatrix::zeros(n, scene.num_sources());
    for (i, &theta) in scene.angles.iter().enumerate() {
        let a = steering(cfg, q, theta)?;
        for (r, e) in a.entries.into_iter().enumerate() {
            manifold[(r, i)] = e;
        }
    }
    let gain = match mode {
        Combining::Analog => combining_matrix(cfg, q)?.adjoint() * manifold,
        Combining::FullyDigital => manifold,
    };
    let mut rng = ChaCha20Rng::seed_from_u64(mix_seed(scene.seed, q as u64));
    let noise = gaussian_matrix(output_rows(cfg, q, mode), scene.snapshots, scene.noise_power, &mut rng);
    Ok(SnapshotMatrix {
        data: gain * sources + noise,
        group: q,
    })
}

/// `Y_q = B_{A,q}^H A_q S + W_q` for one group.
pub fn generate_group_snapshots(
    cfg: &ArrayConfig,
    scene: &SourceScene,
    q: usize,
    mode: Combining,
) -> Result<SnapshotMatrix> {
    cfg.check_group(q)?;
    check_order(cfg, scene, mode)?;
    group_snapshots(cfg, scene, q, mode, &source_matrix(scene))
}

/// Snapshots of every group, sharing one source matrix with independent
/// noise per group.
pub fn generate_all_groups(
    cfg: &ArrayConfig,
    scene: &SourceScene,
    mode: Combining,
) -> Result<Vec<SnapshotMatrix>> {
    check_order(cfg, scene, mode)?;
    let s = source_matrix(scene);
    (0..cfg.num_groups())
        .map(|q| group_snapshots(cfg, scene, q, mode, &s))
        .collect()
}

/// Stacks the rows of several group matrices into one observation.
pub fn stack_groups(groups: &[SnapshotMatrix]) -> Result<SnapshotMatrix> {
    let first = groups
        .first()
        .ok_or_else(|| Error::Input("no groups to stack".into()))?;
    let cols = first.snapshots();
    if groups.iter().any(|g| g.snapshots() != cols) {
        return Err(Error::Input("groups disagree on snapshot count".into()));
    }
    let rows: usize = groups.iter().map(|g| g.rows()).sum();
    let mut data = CMatrix::zeros(rows, cols);
    let mut r0 = 0;
    for g in groups {
        data.view_mut((r0, 0), (g.rows(), cols)).copy_from(&g.data);
        r0 += g.rows();
    }
    Ok(SnapshotMatrix { data, group: 0 })
}

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"H2ADSNAP";
pub const SNAPSHOT_HEADER_LEN: usize = 24;

/// Binary dump: 24-byte header (magic, u32 rows, u32 cols, u32 group,
/// u32 reserved = 0), then little-endian f64 (re, im) pairs in row-major
/// order.
pub fn write_snapshots<W: Write>(y: &SnapshotMatrix, mut w: W) -> Result<()> {
    let rows = u32::try_from(y.rows()).map_err(|_| Error::Input("too many rows".into()))?;
    let cols = u32::try_from(y.snapshots()).map_err(|_| Error::Input("too many columns".into()))?;
    let group = u32::try_from(y.group).map_err(|_| Error::Input("group index too large".into()))?;
    let mut buf = Vec::with_capacity(SNAPSHOT_HEADER_LEN + 16 * y.data.len());
    buf.extend_from_slice(SNAPSHOT_MAGIC);
    buf.extend_from_slice(&rows.to_le_bytes());
    buf.extend_from_slice(&cols.to_le_bytes());
    buf.extend_from_slice(&group.to_le_bytes());
    buf.extend_from_slice(&0u32.to_le_bytes());
    for r in 0..y.rows() {
        for c in 0..y.snapshots() {
            let z = y.data[(r, c)];
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_snapshots<R: Read>(mut r: R) -> Result<SnapshotMatrix> {
    let mut header = [0u8; SNAPSHOT_HEADER_LEN];
    r.read_exact(&mut header)?;
    if &header[..8] != SNAPSHOT_MAGIC {
        return Err(Error::Input("bad snapshot file magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap()) as usize;
    let (rows, cols, group) = (word(8), word(12), word(16));
    let mut body = vec![0u8; rows * cols * 16];
    r.read_exact(&mut body)?;
    let val = |i: usize| f64::from_le_bytes(body[i * 8..i * 8 + 8].try_into().unwrap());
    let data = CMatrix::from_fn(rows, cols, |i, j| {
        let k = 2 * (i * cols + j);
        C64::new(val(k), val(k + 1))
    });
    Ok(SnapshotMatrix { data, group })
}
