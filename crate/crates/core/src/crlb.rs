//! Deterministic Cramér–Rao bound for the DOAs of uncorrelated sources
//! observed through the analog-combined groups.
//!
//! Each group contributes `Tr(R⁻¹ ∂R/∂θ_p R⁻¹ ∂R/∂θ_r)` to the Fisher
//! information; groups are treated as independent observations.

use nalgebra::DMatrix;

use crate::array::{combining_matrix, steering_global, ArrayConfig};
use crate::linalg::jacobi_eigh;
use crate::signal::SourceScene;
use crate::spectral::CovarianceMatrix;
use crate::{CMatrix, Error, Result, C64};

/// Condition number above which a warning is logged.
pub const CONDITION_WARN: f64 = 1e12;

fn column(v: Vec<C64>) -> CMatrix {
    CMatrix::from_vec(v.len(), 1, v)
}

fn check_scene(cfg: &ArrayConfig, scene: &SourceScene, q: usize) -> Result<()> {
    cfg.check_group(q)?;
    if scene.num_sources() > cfg.subarrays() {
        return Err(Error::ModelOrder(format!(
            "{} sources exceed {} subarray outputs",
            scene.num_sources(),
            cfg.subarrays()
        )));
    }
    Ok(())
}

/// `R_q = σ_s² Σ_i B^H a_i a_i^H B + σ_v² I` (`K × K`), with the manifold
/// referenced to the first antenna of the full array.
pub fn model_covariance(cfg: &ArrayConfig, scene: &SourceScene, q: usize) -> Result<CovarianceMatrix> {
    check_scene(cfg, scene, q)?;
    let b = combining_matrix(cfg, q)?;
    let k = cfg.subarrays();
    let mut r = CMatrix::identity(k, k) * C64::new(scene.noise_power, 0.0);
    for &theta in &scene.angles {
        let ba = b.adjoint() * column(steering_global(cfg, q, theta)?);
        r += &ba * ba.adjoint() * C64::new(scene.signal_power, 0.0);
    }
    Ok(CovarianceMatrix {
        data: r,
        snapshots: scene.snapshots,
        group: q,
    })
}

/// `∂R_q/∂θ_i = σ_s² B^H (ȧ a^H + a ȧ^H) B` with
/// `ȧ = j (2π/λ) d cos θ_i · D_q a`, `D_q` the diagonal of global antenna
/// indices of group `q`.
pub fn covariance_derivative(cfg: &ArrayConfig, scene: &SourceScene, q: usize, i: usize) -> Result<CMatrix> {
    check_scene(cfg, scene, q)?;
    let theta = *scene
        .angles
        .get(i)
        .ok_or_else(|| Error::Input(format!("source index {i} out of range")))?;
    let b = combining_matrix(cfg, q)?;
    let a = steering_global(cfg, q, theta)?;
    let offset = cfg.group_offset(q) as f64;
    let scale = C64::new(0.0, cfg.phase_per_sine() * theta.cos());
    let adot: Vec<C64> = a
        .iter()
        .enumerate()
        .map(|(n, &e)| scale * (offset + n as f64) * e)
        .collect();
    let ba = b.adjoint() * column(a);
    let bd = b.adjoint() * column(adot);
    let x = &bd * ba.adjoint();
    Ok((&x + x.adjoint()) * C64::new(scene.signal_power, 0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FimMatrix {
    pub entries: DMatrix<f64>,
    pub per_group: Vec<DMatrix<f64>>,
}

impl FimMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// `|F_pr| / sqrt(F_pp F_rr)`.
    pub fn coupling(&self, p: usize, r: usize) -> f64 {
        let f = &self.entries;
        f[(p, r)].abs() / (f[(p, p)] * f[(r, r)]).sqrt()
    }
}

fn condition_number(r: &CMatrix) -> Result<f64> {
    let (w, _) = jacobi_eigh(r)?;
    let hi = w.first().copied().unwrap_or(0.0);
    let lo = w.last().copied().unwrap_or(0.0);
    Ok(if lo > 0.0 { hi / lo } else { f64::INFINITY })
}

/// Fisher information per snapshot, summed over groups.
pub fn fim(cfg: &ArrayConfig, scene: &SourceScene) -> Result<FimMatrix> {
    let n = scene.num_sources();
    if n == 0 {
        return Err(Error::Input("Fisher information needs at least one source".into()));
    }
    if !(scene.noise_power > 0.0) {
        return Err(Error::DegenerateModel("noise power must be positive".into()));
    }
    let mut total = DMatrix::zeros(n, n);
    let mut per_group = Vec::with_capacity(cfg.num_groups());
    for q in 0..cfg.num_groups() {
        let r = model_covariance(cfg, scene, q)?.data;
        let cond = condition_number(&r)?;
        if cond > CONDITION_WARN {
            log::warn!("group {q} covariance condition number {cond:e}");
        }
        let chol = r
            .clone()
            .cholesky()
            .ok_or_else(|| Error::DegenerateModel(format!("group {q} covariance is not positive definite")))?;
        let solved: Vec<CMatrix> = (0..n)
            .map(|i| covariance_derivative(cfg, scene, q, i).map(|d| chol.solve(&d)))
            .collect::<Result<_>>()?;
        let mut f = DMatrix::zeros(n, n);
        for p in 0..n {
            for s in p..n {
                let v = trace_of_product(&solved[p], &solved[s]);
                f[(p, s)] = v;
                f[(s, p)] = v;
            }
        }
        total += &f;
        per_group.push(f);
    }
    Ok(FimMatrix {
        entries: total,
        per_group,
    })
}

/// `Re Tr(X Y)` without forming the product.
fn trace_of_product(x: &CMatrix, y: &CMatrix) -> f64 {
    let n = x.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..n {
            acc += (x[(i, k)] * y[(k, i)]).re;
        }
    }
    acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrlbResult {
    /// Per-angle variance bound, rad².
    pub bounds: Vec<f64>,
    pub snapshots: usize,
    pub config_hash: String,
    pub diagonal_approximation: bool,
}

impl CrlbResult {
    pub fn std_deg(&self) -> Vec<f64> {
        self.bounds.iter().map(|b| b.sqrt().to_degrees()).collect()
    }
}

/// Diagonal of `FIM⁻¹ / L`, or `1 / (L · FIM_ii)` with the diagonal
/// approximation.
pub fn crlb(cfg: &ArrayConfig, scene: &SourceScene, snapshots: usize, diagonal: bool) -> Result<CrlbResult> {
    if snapshots == 0 {
        return Err(Error::Input("snapshot count must be positive".into()));
    }
    let f = fim(cfg, scene)?;
    crlb_from_fim(&f, snapshots, diagonal, cfg.fingerprint())
}

pub fn crlb_from_fim(f: &FimMatrix, snapshots: usize, diagonal: bool, config_hash: String) -> Result<CrlbResult> {
    let l = snapshots as f64;
    let n = f.dim();
    let bounds: Vec<f64> = if diagonal {
        (0..n).map(|i| 1.0 / (l * f.entries[(i, i)])).collect()
    } else {
        let inv = f
            .entries
            .clone()
            .cholesky()
            .ok_or_else(|| Error::IllPosed("Fisher information is singular".into()))?
            .inverse();
        (0..n).map(|i| inv[(i, i)] / l).collect()
    };
    if bounds.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
        return Err(Error::IllPosed("Fisher information is singular".into()));
    }
    Ok(CrlbResult {
        bounds,
        snapshots,
        config_hash,
        diagonal_approximation: diagonal,
    })
}

/// `(1/N) |a_N^H(θ_p) a_N(θ_r)|` for each `N`, by direct summation.
pub fn orthogonality_profile(spacing_over_wavelength: f64, theta_p: f64, theta_r: f64, sizes: &[usize]) -> Vec<f64> {
    let delta = 2.0 * std::f64::consts::PI * spacing_over_wavelength * (theta_r.sin() - theta_p.sin());
    sizes
        .iter()
        .map(|&n| {
            let s: C64 = (0..n).map(|k| C64::from_polar(1.0, k as f64 * delta)).sum();
            s.norm() / n as f64
        })
        .collect()
}

/// `|1 - e^{jNΔ}| / (N |1 - e^{jΔ}|)`, with the limit 1 when `Δ ≡ 0`.
pub fn orthogonality_closed_form(spacing_over_wavelength: f64, theta_p: f64, theta_r: f64, n: usize) -> f64 {
    let delta = 2.0 * std::f64::consts::PI * spacing_over_wavelength * (theta_r.sin() - theta_p.sin());
    let half = (delta / 2.0).sin();
    if half.abs() < 1e-300 {
        return 1.0;
    }
    // |1 - e^{jx}| = 2 |sin(x/2)|
    ((n as f64 * delta / 2.0).sin() / (n as f64 * half)).abs()
}
