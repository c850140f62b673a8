//! Eigen-domain clustering (EDC) source counting.
//!
//! Per group, the eigenvalues are z-scored, each score `z` is lifted to the
//! point `(z, z^ε)`, the points of all groups are pooled, and DBSCAN
//! separates the dense noise blob near the origin from the sparse signal
//! points. The estimate is the number of points outside the noise cluster
//! divided by the number of groups.

use std::collections::{HashMap, VecDeque};

use crate::spectral::EigenSpectrum;
use crate::{Error, Result};

/// Z-scored eigenvalues of one group.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    pub scores: Vec<f64>,
    /// All eigenvalues equal (zero spread); `scores` is then all zeros.
    pub degenerate: bool,
}

/// `z_j = (λ_j - μ) / σ` with the population standard deviation.
pub fn standardize(eigenvalues: &[f64]) -> Result<Standardized> {
    let n = eigenvalues.len();
    if n < 2 {
        return Err(Error::Input("standardization needs at least two eigenvalues".into()));
    }
    if eigenvalues.iter().any(|l| !l.is_finite()) {
        return Err(Error::Numeric("non-finite eigenvalue".into()));
    }
    let mean = eigenvalues.iter().sum::<f64>() / n as f64;
    let var = eigenvalues.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n as f64;
    let sd = var.sqrt();
    if sd <= 1e-14 * mean.abs().max(f64::MIN_POSITIVE) {
        return Ok(Standardized {
            scores: vec![0.0; n],
            degenerate: true,
        });
    }
    Ok(Standardized {
        scores: eigenvalues.iter().map(|l| (l - mean) / sd).collect(),
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftedPoint {
    pub x: f64,
    pub y: f64,
    pub group: usize,
    pub index: usize,
}

impl LiftedPoint {
    pub fn coords(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

/// Sign-preserving power `sign(z) |z|^ε`; equals `z^ε` for odd integer
/// exponents and for non-negative `z`.
pub fn signed_power(z: f64, exponent: f64) -> f64 {
    z.signum() * z.abs().powf(exponent)
}

/// Maps scores to `(z, sign(z)|z|^ε)` points tagged with their origin.
pub fn lift(scores: &[f64], exponent: f64, group: usize) -> Vec<LiftedPoint> {
    scores
        .iter()
        .enumerate()
        .map(|(index, &z)| LiftedPoint {
            x: z,
            y: if z == 0.0 { 0.0 } else { signed_power(z, exponent) },
            group,
            index,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Noise,
    Cluster(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterLabeling {
    pub labels: Vec<Label>,
    pub core: Vec<bool>,
    pub num_clusters: usize,
}

impl ClusterLabeling {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_clusters];
        for l in &self.labels {
            if let Label::Cluster(c) = l {
                sizes[*c] += 1;
            }
        }
        sizes
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| **l == Label::Noise).count()
    }
}

/// Uniform grid with cell size `eps`; a disc of radius `eps` only touches
/// the 3x3 block of cells around its center.
struct Grid {
    eps: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl Grid {
    fn new(points: &[[f64; 2]], eps: f64) -> Self {
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key(p, eps)).or_default().push(i);
        }
        Self { eps, cells }
    }

    fn key(p: &[f64; 2], eps: f64) -> (i64, i64) {
        ((p[0] / eps).floor() as i64, (p[1] / eps).floor() as i64)
    }

    fn neighbors(&self, points: &[[f64; 2]], i: usize, out: &mut Vec<usize>) {
        out.clear();
        let p = points[i];
        let (cx, cy) = Self::key(&p, self.eps);
        let eps2 = self.eps * self.eps;
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = self.cells.get(&(cx + dx, cy + dy)) {
                    for &j in bucket {
                        let q = points[j];
                        let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
                        if d2 <= eps2 {
                            out.push(j);
                        }
                    }
                }
            }
        }
    }
}

/// DBSCAN with the Euclidean metric. A point is core when at least
/// `min_pts` points (itself included) lie within `eps`. Clusters are numbered
/// in discovery order, scanning points by index; a border point reachable
/// from several clusters stays with the first one that claims it.
pub fn dbscan(points: &[[f64; 2]], eps: f64, min_pts: usize) -> Result<ClusterLabeling> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Input("DBSCAN radius must be positive".into()));
    }
    if min_pts == 0 {
        return Err(Error::Input("DBSCAN min_pts must be at least 1".into()));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite point".into()));
    }
    let n = points.len();
    let grid = Grid::new(points, eps);
    let mut labels: Vec<Option<Label>> = vec![None; n];
    let mut core = vec![false; n];
    let mut num_clusters = 0;
    let mut nbrs = Vec::new();
    let mut queue = VecDeque::new();

    for i in 0..n {
        if labels[i].is_some() {
            continue;
        }
        grid.neighbors(points, i, &mut nbrs);
        if nbrs.len() < min_pts {
            labels[i] = Some(Label::Noise);
            continue;
        }
        let c = num_clusters;
        num_clusters += 1;
        core[i] = true;
        labels[i] = Some(Label::Cluster(c));
        queue.clear();
        queue.extend(nbrs.iter().copied());
        while let Some(j) = queue.pop_front() {
            match labels[j] {
                Some(Label::Cluster(_)) => continue,
                Some(Label::Noise) => {
                    // a previously rejected point becomes a border point
                    labels[j] = Some(Label::Cluster(c));
                }
                None => labels[j] = Some(Label::Cluster(c)),
            }
            grid.neighbors(points, j, &mut nbrs);
            if nbrs.len() >= min_pts {
                core[j] = true;
                queue.extend(nbrs.iter().copied().filter(|&k| !matches!(labels[k], Some(Label::Cluster(_)))));
            }
        }
    }
    // Points labelled Noise before being reached may still be core points of
    // nobody; re-check core flags for completeness of the labeling.
    for i in 0..n {
        if !core[i] && labels[i] != Some(Label::Noise) {
            grid.neighbors(points, i, &mut nbrs);
            core[i] = nbrs.len() >= min_pts;
        }
    }
    Ok(ClusterLabeling {
        labels: labels.into_iter().map(|l| l.unwrap_or(Label::Noise)).collect(),
        core,
        num_clusters,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdcParams {
    /// Lift exponent ε.
    pub exponent: f64,
    /// DBSCAN radius in z units.
    pub eps: f64,
    /// DBSCAN density threshold; `None` means `max(4, Q + 1)`.
    pub min_pts: Option<usize>,
}

impl Default for EdcParams {
    fn default() -> Self {
        Self {
            exponent: 2.0,
            eps: 0.5,
            min_pts: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdcEstimate {
    pub count: usize,
    pub signal_points: usize,
    pub noise_cluster_size: usize,
    pub points: Vec<LiftedPoint>,
    pub labeling: ClusterLabeling,
    /// Groups whose spectrum had zero spread.
    pub degenerate_groups: Vec<usize>,
}

/// Pools the lifted spectra of all groups, runs DBSCAN and counts the
/// points outside the largest cluster (ties: centroid nearest the origin).
/// DBSCAN outliers count as signal. `Â = round(|C_signal| / Q)`.
pub fn estimate_count_edc(spectra: &[EigenSpectrum], params: &EdcParams) -> Result<EdcEstimate> {
    let eigenvalues: Vec<&[f64]> = spectra.iter().map(|s| s.values.as_slice()).collect();
    estimate_count_from_eigenvalues(&eigenvalues, params)
}

pub fn estimate_count_from_eigenvalues(groups: &[&[f64]], params: &EdcParams) -> Result<EdcEstimate> {
    if groups.is_empty() || groups.iter().all(|g| g.is_empty()) {
        return Err(Error::Input("no eigenvalues to cluster".into()));
    }
    if !(params.exponent >= 1.0) {
        return Err(Error::Input("lift exponent must be at least 1".into()));
    }
    let q = groups.len();
    let mut points = Vec::new();
    let mut degenerate_groups = Vec::new();
    for (g, ev) in groups.iter().enumerate() {
        let std = standardize(ev)?;
        if std.degenerate {
            degenerate_groups.push(g);
        }
        points.extend(lift(&std.scores, params.exponent, g));
    }
    let coords: Vec<[f64; 2]> = points.iter().map(LiftedPoint::coords).collect();
    let min_pts = params.min_pts.unwrap_or_else(|| (q + 1).max(4));
    let labeling = dbscan(&coords, params.eps, min_pts)?;

    let sizes = labeling.cluster_sizes();
    let centroid_norm = |c: usize| {
        let (mut sx, mut sy, mut k) = (0.0, 0.0, 0.0);
        for (p, l) in coords.iter().zip(&labeling.labels) {
            if *l == Label::Cluster(c) {
                sx += p[0];
                sy += p[1];
                k += 1.0;
            }
        }
        ((sx / k).powi(2) + (sy / k).powi(2)).sqrt()
    };
    let noise_cluster = (0..sizes.len()).min_by(|&a, &b| {
        sizes[b]
            .cmp(&sizes[a])
            .then_with(|| centroid_norm(a).total_cmp(&centroid_norm(b)))
    });
    let noise_cluster_size = noise_cluster.map_or(0, |c| sizes[c]);
    let signal_points = points.len() - noise_cluster_size;
    let count = (signal_points as f64 / q as f64).round() as usize;
    Ok(EdcEstimate {
        count,
        signal_points,
        noise_cluster_size,
        points,
        labeling,
        degenerate_groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn standardize_two_values() {
        let s = standardize(&[2.0, 0.0]).unwrap();
        assert_eq!(s.scores, vec![1.0, -1.0]);
        assert!(!s.degenerate);
    }

    #[test]
    fn standardize_flat_spectrum_flags() {
        let s = standardize(&[3.0; 5]).unwrap();
        assert!(s.degenerate);
        assert_eq!(s.scores, vec![0.0; 5]);
        assert!(standardize(&[1.0]).is_err());
    }

    #[test]
    fn lift_conventions() {
        let p = lift(&[1.0, -2.0, 2.0], 2.0, 0);
        assert_eq!((p[0].x, p[0].y), (1.0, 1.0));
        assert_eq!((p[1].x, p[1].y), (-2.0, -4.0));
        let p = lift(&[2.0], 3.0, 1);
        assert_eq!((p[0].x, p[0].y, p[0].group), (2.0, 8.0, 1));
        assert_eq!(lift(&[1.0], 2.7, 0)[0].y, 1.0);
    }

    #[test]
    fn tiny_dbscan_cases() {
        let l = dbscan(&[[0.0, 0.0], [0.1, 0.0]], 0.5, 2).unwrap();
        assert_eq!(l.labels, vec![Label::Cluster(0), Label::Cluster(0)]);
        let l = dbscan(&[[0.0, 0.0], [0.1, 0.0], [5.0, 5.0]], 0.5, 2).unwrap();
        assert_eq!(l.labels[2], Label::Noise);
        assert!(dbscan(&[[0.0, 0.0]], 0.0, 2).is_err());
        assert!(dbscan(&[[0.0, 0.0]], 1.0, 0).is_err());
        let empty = dbscan(&[], 1.0, 3).unwrap();
        assert_eq!(empty.num_clusters, 0);
    }

    #[test]
    fn border_point_becomes_member_after_noise_label() {
        // point 0 is visited first, is not core, then joins cluster via point 1
        let pts = [[0.0, 0.0], [0.4, 0.0], [0.5, 0.1], [0.6, 0.0]];
        let l = dbscan(&pts, 0.45, 3).unwrap();
        assert_eq!(l.labels[0], Label::Cluster(0));
        assert!(!l.core[0]);
    }

    #[test]
    fn constructed_single_source_spectrum() {
        let mut ev = vec![1.0; 30];
        ev[0] = 100.0;
        let est = estimate_count_from_eigenvalues(&[&ev], &EdcParams::default()).unwrap();
        assert_eq!(est.count, 1);
        assert_eq!(est.signal_points + est.noise_cluster_size, 30);
    }

    #[test]
    fn scale_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let groups: Vec<Vec<f64>> = (0..3)
                .map(|_| {
                    let mut v: Vec<f64> = (0..20).map(|_| rng.gen_range(0.5..1.5)).collect();
                    for s in v.iter_mut().take(rng.gen_range(0..4)) {
                        *s *= rng.gen_range(5.0..30.0);
                    }
                    v
                })
                .collect();
            let c: f64 = rng.gen_range(0.01..100.0);
            let scaled: Vec<Vec<f64>> = groups.iter().map(|g| g.iter().map(|x| x * c).collect()).collect();
            let r = |g: &Vec<Vec<f64>>| {
                let refs: Vec<&[f64]> = g.iter().map(|v| v.as_slice()).collect();
                estimate_count_from_eigenvalues(&refs, &EdcParams::default()).unwrap().count
            };
            assert_eq!(r(&groups), r(&scaled));
        }
    }

    #[test]
    fn empty_pool_rejected() {
        assert!(estimate_count_from_eigenvalues(&[], &EdcParams::default()).is_err());
    }
}
