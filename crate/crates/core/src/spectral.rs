//! Sample covariance and its Hermitian eigen-decomposition.

use crate::linalg::jacobi_eigh;
use crate::signal::SnapshotMatrix;
use crate::{CMatrix, Error, Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    pub data: CMatrix,
    pub snapshots: usize,
    pub group: usize,
}

impl CovarianceMatrix {
    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.data[(i, i)].re).sum()
    }
}

/// Eigenvalues in descending order with the matching unitary eigenvector
/// basis (column `i` belongs to `values[i]`).
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSpectrum {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl EigenSpectrum {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// `R = (1/T) Y Y^H`, symmetrized.
pub fn sample_covariance(y: &SnapshotMatrix) -> Result<CovarianceMatrix> {
    let t = y.snapshots();
    if t == 0 || y.rows() == 0 {
        return Err(Error::Input("empty snapshot matrix".into()));
    }
    Ok(CovarianceMatrix {
        data: hermitian_gram(&y.data),
        snapshots: t,
        group: y.group,
    })
}

/// `(1/T) Y Y^H` from the upper triangle, mirrored so the result is exactly
/// Hermitian.
fn hermitian_gram(y: &CMatrix) -> CMatrix {
    let (n, t) = y.shape();
    // rows as contiguous series
    let rows: Vec<Vec<C64>> = (0..n).map(|i| y.row(i).iter().copied().collect()).collect();
    let inv = 1.0 / t as f64;
    let mut r = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let (a, b) = (&rows[i], &rows[j]);
            let (mut re, mut im) = (0.0, 0.0);
            for k in 0..t {
                re += a[k].re * b[k].re + a[k].im * b[k].im;
                im += a[k].im * b[k].re - a[k].re * b[k].im;
            }
            let v = C64::new(re * inv, im * inv);
            r[(i, j)] = v;
            r[(j, i)] = v.conj();
        }
        r[(i, i)].im = 0.0;
    }
    r
}

pub fn hermitian_eig(r: &CovarianceMatrix) -> Result<EigenSpectrum> {
    eig(&r.data)
}

pub fn eig(m: &CMatrix) -> Result<EigenSpectrum> {
    let (values, vectors) = jacobi_eigh(m)?;
    Ok(EigenSpectrum { values, vectors })
}

/// Descending eigenvalues only, via Householder tridiagonalization and
/// implicit QR. Much cheaper than the Jacobi path for large matrices; used
/// where eigenvectors are not needed.
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Input("matrix is not square".into()));
    }
    if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut w: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    w.sort_by(|a, b| b.total_cmp(a));
    Ok(w)
}

/// Convenience: descending eigenvalues of the sample covariance of `y`.
pub fn covariance_eigenvalues(y: &SnapshotMatrix) -> Result<Vec<f64>> {
    eigenvalues(&sample_covariance(y)?.data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::ArrayConfig;
    use crate::signal::{generate_group_snapshots, Combining, SourceScene};

    #[test]
    fn single_column_is_rank_one() {
        let y = CMatrix::from_column_slice(3, 1, &[C64::new(1.0, 1.0), C64::new(0.0, 2.0), C64::new(-1.0, 0.5)]);
        let r = sample_covariance(&SnapshotMatrix { data: y.clone(), group: 0 }).unwrap();
        assert!((&r.data - &y * y.adjoint()).norm() < 1e-14);
        let s = hermitian_eig(&r).unwrap();
        assert!((s.values[0] - y.norm_squared()).abs() < 1e-12);
        assert!(s.values[1].abs() < 1e-12 && s.values[2].abs() < 1e-12);
    }

    #[test]
    fn trace_identity() {
        let cfg = ArrayConfig::digital_groups(vec![9]).unwrap();
        let scene = SourceScene::with_snr_db(vec![0.3], 3.0, 40, 5).unwrap();
        let y = generate_group_snapshots(&cfg, &scene, 0, Combining::FullyDigital).unwrap();
        let r = sample_covariance(&y).unwrap();
        assert!((r.trace() - y.data.norm_squared() / 40.0).abs() < 1e-10);
    }

    #[test]
    fn fast_eigenvalues_match_jacobi() {
        let cfg = ArrayConfig::digital_groups(vec![40]).unwrap();
        let scene = SourceScene::with_snr_db(vec![0.3, -0.2], 0.0, 80, 2).unwrap();
        let y = generate_group_snapshots(&cfg, &scene, 0, Combining::FullyDigital).unwrap();
        let r = sample_covariance(&y).unwrap();
        let slow = hermitian_eig(&r).unwrap().values;
        let fast = eigenvalues(&r.data).unwrap();
        for (a, b) in slow.iter().zip(&fast) {
            assert!((a - b).abs() < 1e-9 * slow[0]);
        }
    }

    #[test]
    fn noise_only_covariance_near_identity() {
        let cfg = ArrayConfig::digital_groups(vec![8]).unwrap();
        let scene = SourceScene::new(vec![], 0.0, 2.0, 100_000, 3).unwrap();
        let y = generate_group_snapshots(&cfg, &scene, 0, Combining::FullyDigital).unwrap();
        let r = sample_covariance(&y).unwrap();
        let want = CMatrix::identity(8, 8) * C64::new(2.0, 0.0);
        assert!((&r.data - &want).norm() / want.norm() < 0.03);
    }

    #[test]
    fn empty_is_input_error() {
        let y = SnapshotMatrix { data: CMatrix::zeros(3, 0), group: 0 };
        assert!(matches!(sample_covariance(&y), Err(Error::Input(_))));
    }

    #[test]
    fn strong_sources_separate_from_noise_floor() {
        let cfg = ArrayConfig::digital_groups(vec![29, 31, 37]).unwrap();
        let angles: Vec<f64> = [-20.0f64, 11.0, 40.0].iter().map(|d| d.to_radians()).collect();
        let scene = SourceScene::with_snr_db(angles, 10.0, 200, 11).unwrap();
        for q in 0..3 {
            let y = generate_group_snapshots(&cfg, &scene, q, Combining::FullyDigital).unwrap();
            let ev = covariance_eigenvalues(&y).unwrap();
            assert_eq!(ev.iter().filter(|&&l| l > 10.0).count(), 3);
        }
    }
}
