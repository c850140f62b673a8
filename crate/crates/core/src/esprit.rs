//! Per-group ESPRIT on the virtual subarray outputs and expansion of the
//! resulting phase ambiguities into candidate directions.

use std::f64::consts::PI;
use std::io::Write;

use crate::array::ArrayConfig;
use crate::linalg::{exchange, general_eigenvalues};
use crate::signal::SnapshotMatrix;
use crate::spectral::{eig, sample_covariance};
use crate::{CMatrix, Error, Result, C64};

/// Relative size below which the A-th eigenvalue counts as zero.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateAngle {
    /// Radians.
    pub angle: f64,
    pub group: usize,
    /// Which ESPRIT root produced the candidate.
    pub branch: usize,
    /// Ambiguity index in `0..M_q`.
    pub m: usize,
}

impl CandidateAngle {
    pub fn sin(&self) -> f64 {
        self.angle.sin()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CandidateAngleSet {
    /// Canonical order: group-major, then branch, then ascending sine.
    pub candidates: Vec<CandidateAngle>,
    pub per_group: Vec<usize>,
}

impl CandidateAngleSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn num_groups(&self) -> usize {
        self.per_group.len()
    }

    pub fn group(&self, q: usize) -> impl Iterator<Item = &CandidateAngle> {
        self.candidates.iter().filter(move |c| c.group == q)
    }

    /// CSV with header `angle_deg,group,branch,m`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "angle_deg,group,branch,m")?;
        for c in &self.candidates {
            writeln!(w, "{:.9e},{},{},{}", c.angle.to_degrees(), c.group, c.branch, c.m)?;
        }
        Ok(())
    }
}

/// Wraps a phase into `(-π, π]`.
pub fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Electrical phase of the virtual array of group `q` for direction `θ`,
/// wrapped into `(-π, π]`.
pub fn virtual_phase(cfg: &ArrayConfig, q: usize, theta: f64) -> f64 {
    wrap_phase(cfg.phase_per_sine() * cfg.subarray_width(q) as f64 * theta.sin())
}

/// LS-ESPRIT on the `K × T` output of one group. Returns `A` phases in
/// `(-π, π]`, each an estimate of `(2π/λ) M_q d sin θ_i` modulo `2π`,
/// ordered by the eigenvalues of the rotation operator as found.
///
/// The covariance is forward-backward averaged when `A ≥ 2`.
pub fn esprit_group(y: &SnapshotMatrix, num_sources: usize) -> Result<Vec<f64>> {
    let k = y.rows();
    if num_sources == 0 {
        return Err(Error::ModelOrder("ESPRIT needs at least one source".into()));
    }
    if num_sources >= k {
        return Err(Error::ModelOrder(format!(
            "{num_sources} sources need more than {k} virtual elements"
        )));
    }
    let mut r = sample_covariance(y)?.data;
    if num_sources >= 2 {
        let j = exchange(k);
        r = (&r + &j * r.map(|z| z.conj()) * &j) * C64::new(0.5, 0.0);
    }
    let spec = eig(&r)?;
    let top = spec.values[0];
    let last = spec.values[num_sources - 1];
    if !(top > 0.0) || last <= RANK_TOL * top {
        return Err(Error::DegenerateSubspace(format!(
            "signal subspace has numeric rank below {num_sources}"
        )));
    }
    let es = spec.vectors.columns(0, num_sources);
    let upper: CMatrix = es.rows(0, k - 1).into_owned();
    let lower: CMatrix = es.rows(1, k - 1).into_owned();
    let gram = upper.adjoint() * &upper;
    let rhs = upper.adjoint() * &lower;
    let psi = gram
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::DegenerateSubspace("shift-invariance system is singular".into()))?;
    Ok(general_eigenvalues(&psi)?.into_iter().map(|z| z.arg()).collect())
}

/// All directions consistent with phase `ψ` on the virtual array of group
/// `q`: `sin θ = (ψ + 2πm) / (2π M_q d/λ)` for every integer `m` putting the
/// sine in `[-1, 1)`. The stored index is `m mod M_q`.
pub fn expand_ambiguities(cfg: &ArrayConfig, psi: f64, q: usize, branch: usize) -> Result<Vec<CandidateAngle>> {
    cfg.check_group(q)?;
    if !psi.is_finite() {
        return Err(Error::Numeric("non-finite ESPRIT phase".into()));
    }
    let width = cfg.subarray_width(q);
    let c = cfg.phase_per_sine() * width as f64;
    let two_pi = 2.0 * PI;
    let lo = ((-c - psi) / two_pi).ceil() as i64 - 1;
    let hi = ((c - psi) / two_pi).floor() as i64 + 1;
    let mut out = Vec::new();
    for m in lo..=hi {
        let mut s = (psi + two_pi * m as f64) / c;
        if s < -1.0 && s > -1.0 - 1e-12 {
            s = -1.0;
        }
        if !(-1.0..1.0).contains(&s) {
            continue;
        }
        out.push(CandidateAngle {
            angle: s.asin(),
            group: q,
            branch,
            m: m.rem_euclid(width as i64) as usize,
        });
    }
    Ok(out)
}

/// Runs ESPRIT on every group and expands every root.
pub fn build_candidate_set(cfg: &ArrayConfig, groups: &[SnapshotMatrix], num_sources: usize) -> Result<CandidateAngleSet> {
    let mut set = CandidateAngleSet {
        candidates: Vec::new(),
        per_group: vec![0; cfg.num_groups()],
    };
    for y in groups {
        let q = y.group;
        cfg.check_group(q)?;
        let phases = esprit_group(y, num_sources)?;
        for (branch, psi) in phases.into_iter().enumerate() {
            let c = expand_ambiguities(cfg, psi, q, branch)?;
            set.per_group[q] += c.len();
            set.candidates.extend(c);
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{generate_all_groups, Combining, SourceScene};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn doa_cfg() -> ArrayConfig {
        ArrayConfig::half_wavelength(16, vec![7, 13, 17]).unwrap()
    }

    fn noiseless(angles: &[f64], seed: u64) -> Vec<SnapshotMatrix> {
        let scene = SourceScene::new(angles.iter().map(|d| d.to_radians()).collect(), 1.0, 0.0, 64, seed).unwrap();
        generate_all_groups(&doa_cfg(), &scene, Combining::Analog).unwrap()
    }

    #[test]
    fn single_source_phase() {
        let y = noiseless(&[11.0], 1);
        let psi = esprit_group(&y[0], 1).unwrap();
        let want = wrap_phase(7.0 * PI * 11f64.to_radians().sin());
        assert!((psi[0] - want).abs() < 1e-8);
    }

    #[test]
    fn two_source_phases_as_set() {
        let y = noiseless(&[11.0, 23.0], 2);
        let mut psi = esprit_group(&y[0], 2).unwrap();
        psi.sort_by(f64::total_cmp);
        let mut want = vec![
            wrap_phase(7.0 * PI * 11f64.to_radians().sin()),
            wrap_phase(7.0 * PI * 23f64.to_radians().sin()),
        ];
        want.sort_by(f64::total_cmp);
        for (a, b) in psi.iter().zip(&want) {
            assert!((a - b).abs() < 1e-6, "{psi:?} vs {want:?}");
        }
    }

    #[test]
    fn order_preconditions() {
        let y = noiseless(&[11.0], 3);
        assert!(matches!(esprit_group(&y[0], 0), Err(Error::ModelOrder(_))));
        assert!(matches!(esprit_group(&y[0], 16), Err(Error::ModelOrder(_))));
        assert!(matches!(esprit_group(&y[0], 2), Err(Error::DegenerateSubspace(_))));
    }

    #[test]
    fn broadside_phase_expansion() {
        let cfg = doa_cfg();
        let c = expand_ambiguities(&cfg, 0.0, 0, 0).unwrap();
        let mut s: Vec<f64> = c.iter().map(|c| c.sin() * 7.0 / 2.0).collect();
        s.sort_by(f64::total_cmp);
        let want = [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0];
        assert_eq!(s.len(), 7);
        for (a, b) in s.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        let mut ms: Vec<usize> = c.iter().map(|c| c.m).collect();
        ms.sort();
        assert_eq!(ms, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn unit_width_is_unambiguous() {
        let cfg = ArrayConfig::half_wavelength(8, vec![1]).unwrap();
        let theta = 0.4f64;
        let c = expand_ambiguities(&cfg, virtual_phase(&cfg, 0, theta), 0, 0).unwrap();
        assert_eq!(c.len(), 1);
        assert!((c[0].angle - theta).abs() < 1e-12);
    }

    #[test]
    fn candidate_count_for_two_sources() {
        let y = noiseless(&[11.0, 23.0], 4);
        let set = build_candidate_set(&doa_cfg(), &y, 2).unwrap();
        assert_eq!(set.len(), 74);
        assert_eq!(set.per_group, vec![14, 26, 34]);
    }

    #[test]
    fn coprime_groups_agree_only_on_truth() {
        let truth = [11.0f64, 23.0];
        let y = noiseless(&truth, 5);
        let set = build_candidate_set(&doa_cfg(), &y, 2).unwrap();
        let mut shared = Vec::new();
        for c in set.group(0) {
            let hits = (1..3)
                .filter(|&q| set.group(q).any(|o| (o.angle - c.angle).abs() < 1e-6))
                .count();
            if hits > 0 {
                shared.push(c.angle.to_degrees());
            }
        }
        shared.sort_by(f64::total_cmp);
        assert_eq!(shared.len(), 2);
        for (a, b) in shared.iter().zip(truth) {
            assert!((a - b).abs() < 1e-6);
        }
        // and groups 1, 2 share nothing else either
        let extra = set
            .group(1)
            .filter(|c| set.group(2).any(|o| (o.angle - c.angle).abs() < 1e-6))
            .count();
        assert_eq!(extra, 2);
    }

    #[test]
    fn round_trip_inversion() {
        let cfg = ArrayConfig::half_wavelength(16, vec![1, 7, 13, 17, 29]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10_000 {
            let theta = rng.gen_range(-1.5f64..1.5);
            for q in 0..cfg.num_groups() {
                let c = expand_ambiguities(&cfg, virtual_phase(&cfg, q, theta), q, 0).unwrap();
                assert_eq!(c.len(), cfg.subarray_width(q));
                assert!(c.iter().any(|c| (c.angle - theta).abs() < 1e-10));
            }
        }
    }

    #[test]
    fn csv_layout() {
        let cfg = doa_cfg();
        let set = CandidateAngleSet {
            candidates: expand_ambiguities(&cfg, 0.0, 0, 1).unwrap(),
            per_group: vec![7, 0, 0],
        };
        let mut buf = Vec::new();
        set.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("angle_deg,group,branch,m"));
        assert_eq!(lines.count(), 7);
    }
}
