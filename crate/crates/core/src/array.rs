//! H²AD array geometry and manifold vectors.
//!
//! A uniform linear array of `M` antennas is split into `Q` groups. Group `q`
//! holds `K` subarrays of `M_q` adjacent antennas each, so it spans
//! `N_q = K * M_q` antennas. Every subarray feeds one RF chain through an
//! analog phase-shifter network.

use std::f64::consts::PI;

use sha2::{Digest, Sha256};

use crate::{CMatrix, Error, Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayConfig {
    subarrays: usize,
    antennas_per_subarray: Vec<usize>,
    spacing: f64,
    wavelength: f64,
    /// Per group, one phase per antenna (length `N_q`), row-major over
    /// (subarray, antenna). `None` means all zero.
    analog_phases: Vec<Option<Vec<f64>>>,
}

impl ArrayConfig {
    /// Builds a configuration with `subarrays` subarrays in every group and
    /// `antennas_per_subarray[q]` antennas per subarray of group `q`.
    pub fn new(
        subarrays: usize,
        antennas_per_subarray: Vec<usize>,
        spacing: f64,
        wavelength: f64,
    ) -> Result<Self> {
        if antennas_per_subarray.is_empty() {
            return Err(Error::Config("at least one group is required".into()));
        }
        if subarrays == 0 {
            return Err(Error::Config("subarrays per group must be positive".into()));
        }
        if antennas_per_subarray.iter().any(|&m| m == 0) {
            return Err(Error::Config(
                "antennas per subarray must be positive".into(),
            ));
        }
        if !(spacing.is_finite() && spacing > 0.0 && wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::Config(
                "spacing and wavelength must be positive and finite".into(),
            ));
        }
        let groups = antennas_per_subarray.len();
        let cfg = Self {
            subarrays,
            antennas_per_subarray,
            spacing,
            wavelength,
            analog_phases: vec![None; groups],
        };
        if let Some(w) = cfg.spacing_warning() {
            log::warn!("{w}");
        }
        Ok(cfg)
    }

    /// Half-wavelength spacing with unit wavelength.
    pub fn half_wavelength(subarrays: usize, antennas_per_subarray: Vec<usize>) -> Result<Self> {
        Self::new(subarrays, antennas_per_subarray, 0.5, 1.0)
    }

    /// Fully digital groups of the given sizes: one "subarray" per group whose
    /// width is the group size. Used for source counting, where every antenna
    /// of a group is sampled.
    pub fn digital_groups(group_sizes: Vec<usize>) -> Result<Self> {
        Self::half_wavelength(1, group_sizes)
    }

    /// Sets the analog phases of group `q` (one per antenna, length `N_q`).
    pub fn with_analog_phases(mut self, q: usize, phases: Vec<f64>) -> Result<Self> {
        self.check_group(q)?;
        if phases.len() != self.group_size(q) {
            return Err(Error::Config(format!(
                "group {q} needs {} analog phases, got {}",
                self.group_size(q),
                phases.len()
            )));
        }
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("analog phases must be finite".into()));
        }
        self.analog_phases[q] = Some(phases);
        Ok(self)
    }

    pub fn num_groups(&self) -> usize {
        self.antennas_per_subarray.len()
    }

    pub fn subarrays(&self) -> usize {
        self.subarrays
    }

    pub fn antennas_per_subarray(&self) -> &[usize] {
        &self.antennas_per_subarray
    }

    pub fn subarray_width(&self, q: usize) -> usize {
        self.antennas_per_subarray[q]
    }

    /// `N_q = K * M_q`.
    pub fn group_size(&self, q: usize) -> usize {
        self.subarrays * self.antennas_per_subarray[q]
    }

    /// Total antenna count `M`.
    pub fn total_antennas(&self) -> usize {
        (0..self.num_groups()).map(|q| self.group_size(q)).sum()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// Electrical phase step per unit of `sin θ`: `2π d / λ`.
    pub fn phase_per_sine(&self) -> f64 {
        2.0 * PI * self.spacing / self.wavelength
    }

    /// Index of the first antenna of group `q` in the full array.
    pub fn group_offset(&self, q: usize) -> usize {
        (0..q).map(|j| self.group_size(j)).sum()
    }

    pub fn analog_phases(&self, q: usize) -> Option<&[f64]> {
        self.analog_phases[q].as_deref()
    }

    pub fn is_pairwise_coprime(&self) -> bool {
        let m = &self.antennas_per_subarray;
        for i in 0..m.len() {
            for j in i + 1..m.len() {
                if gcd(m[i], m[j]) != 1 {
                    return false;
                }
            }
        }
        true
    }

    /// Grating lobes appear once `d > λ/2`; the model still evaluates.
    pub fn spacing_warning(&self) -> Option<String> {
        (self.spacing > self.wavelength / 2.0 + 1e-15).then(|| {
            format!(
                "element spacing {} exceeds half a wavelength ({})",
                self.spacing,
                self.wavelength / 2.0
            )
        })
    }

    pub(crate) fn check_group(&self, q: usize) -> Result<()> {
        if q >= self.num_groups() {
            return Err(Error::Config(format!(
                "group index {q} out of range (have {} groups)",
                self.num_groups()
            )));
        }
        Ok(())
    }

    /// Short stable digest of the geometry, for result provenance.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!(
            "K={};M={:?};d={:e};lambda={:e}",
            self.subarrays, self.antennas_per_subarray, self.spacing, self.wavelength
        ));
        for p in &self.analog_phases {
            match p {
                None => h.update(b"|0"),
                Some(v) => {
                    for x in v {
                        h.update(x.to_le_bytes());
                    }
                }
            }
        }
        let digest = h.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn check_angle(theta: f64) -> Result<()> {
    if !theta.is_finite() || theta.abs() > PI / 2.0 + 1e-12 {
        return Err(Error::Input(format!(
            "angle {theta} rad outside [-pi/2, pi/2]"
        )));
    }
    Ok(())
}

/// Manifold vector of one group for a single direction.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector {
    pub entries: Vec<C64>,
    pub angle: f64,
    pub group: usize,
}

impl SteeringVector {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn phase_ramp(len: usize, step: f64) -> Vec<C64> {
    (0..len)
        .map(|n| {
            if n == 0 {
                C64::new(1.0, 0.0)
            } else {
                C64::from_polar(1.0, n as f64 * step)
            }
        })
        .collect()
}

/// `a_q(θ)`: entry `n` is `exp(j 2π/λ · n d sin θ)` for `n = 0..N_q`.
pub fn steering(cfg: &ArrayConfig, q: usize, theta: f64) -> Result<SteeringVector> {
    cfg.check_group(q)?;
    check_angle(theta)?;
    let step = cfg.phase_per_sine() * theta.sin();
    Ok(SteeringVector {
        entries: phase_ramp(cfg.group_size(q), step),
        angle: theta,
        group: q,
    })
}

/// Group manifold referenced to the first antenna of the whole array, i.e.
/// `steering` multiplied by `exp(j 2π/λ · d sin θ · offset_q)`.
pub fn steering_global(cfg: &ArrayConfig, q: usize, theta: f64) -> Result<Vec<C64>> {
    cfg.check_group(q)?;
    check_angle(theta)?;
    let step = cfg.phase_per_sine() * theta.sin();
    let offset = cfg.group_offset(q) as f64;
    Ok((0..cfg.group_size(q))
        .map(|n| C64::from_polar(1.0, (offset + n as f64) * step))
        .collect())
}

/// Virtual-array manifold `a_{M_q}(θ)` of the `K` subarray outputs, whose
/// element spacing is `M_q d`.
pub fn virtual_steering(cfg: &ArrayConfig, q: usize, theta: f64) -> Result<SteeringVector> {
    cfg.check_group(q)?;
    check_angle(theta)?;
    let step = cfg.phase_per_sine() * cfg.subarray_width(q) as f64 * theta.sin();
    Ok(SteeringVector {
        entries: phase_ramp(cfg.subarrays(), step),
        angle: theta,
        group: q,
    })
}

/// Subarray array factor `g_q(θ) = Σ_{m<M_q} e^{j 2π/λ m d sin θ}` in its
/// closed geometric-series form, with the removable singularity at
/// `d sin θ / λ ∈ ℤ` replaced by its limit `M_q`.
pub fn subarray_gain(cfg: &ArrayConfig, q: usize, theta: f64) -> Result<C64> {
    cfg.check_group(q)?;
    check_angle(theta)?;
    let m = cfg.subarray_width(q) as f64;
    let x = cfg.phase_per_sine() * theta.sin();
    let one = C64::new(1.0, 0.0);
    let den = one - C64::from_polar(1.0, x);
    if den.norm() < 1e-12 {
        return Ok(C64::new(m, 0.0));
    }
    if den.norm() < 1e-4 {
        // cancellation in the closed form; the direct sum is exact enough here
        return Ok((0..cfg.subarray_width(q))
            .map(|i| C64::from_polar(1.0, i as f64 * x))
            .sum());
    }
    Ok((one - C64::from_polar(1.0, m * x)) / den)
}

/// Analog combining matrix `B_{A,q}` (`N_q × K`). Column `k` carries
/// `e^{jφ_{q,k,m}} / √M_q` on the antennas of subarray `k`, so that the RF
/// outputs are `B^H x` and `B^H B = I`.
pub fn combining_matrix(cfg: &ArrayConfig, q: usize) -> Result<CMatrix> {
    cfg.check_group(q)?;
    let width = cfg.subarray_width(q);
    let k = cfg.subarrays();
    let norm = 1.0 / (width as f64).sqrt();
    let phases = cfg.analog_phases(q);
    let mut b = CMatrix::zeros(cfg.group_size(q), k);
    for col in 0..k {
        for m in 0..width {
            let row = col * width + m;
            let phi = phases.map_or(0.0, |p| p[row]);
            b[(row, col)] = C64::from_polar(norm, phi);
        }
    }
    Ok(b)
}
