//! Cyclic Jacobi eigensolver for complex Hermitian matrices and a few small
//! dense helpers.

use crate::{CMatrix, Error, Result, C64};

/// Largest dimension accepted by [`jacobi_eigh`].
pub const MAX_EIG_DIM: usize = 256;

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition `A = V diag(w) V^H` of a Hermitian matrix by cyclic
/// two-sided Jacobi rotations. Eigenvalues are returned in descending order;
/// ties keep the original diagonal order. Each eigenvector is normalized so
/// that its largest-magnitude component (first one on ties) is real and
/// positive.
///
/// Only the Hermitian part `(A + A^H)/2` is used.
pub fn jacobi_eigh(a: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = a.nrows();
    let (m, v) = jacobi_core(a, true)?;
    let v = CMatrix::from_vec(n, n, v.unwrap_or_default());
    Ok(finish(&m, n, v))
}

/// Eigenvalues only, descending. Same iteration as [`jacobi_eigh`] without
/// accumulating the rotations.
pub fn jacobi_eigvals(a: &CMatrix) -> Result<Vec<f64>> {
    let n = a.nrows();
    let (m, _) = jacobi_core(a, false)?;
    let mut w: Vec<f64> = (0..n).map(|i| m[i * n + i].re).collect();
    w.sort_by(|x, y| y.total_cmp(x));
    Ok(w)
}

/// Runs the sweeps on a column-major copy; returns the rotated matrix and,
/// if requested, the accumulated rotations.
fn jacobi_core(a: &CMatrix, vectors: bool) -> Result<(Vec<C64>, Option<Vec<C64>>)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Input(format!("matrix is {}x{}, not square", n, a.ncols())));
    }
    if n > MAX_EIG_DIM {
        return Err(Error::Input(format!(
            "dimension {n} exceeds eigensolver cap {MAX_EIG_DIM}"
        )));
    }
    if a.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }

    let h = (a + a.adjoint()) * C64::new(0.5, 0.0);
    let mut m: Vec<C64> = h.as_slice().to_vec();
    for i in 0..n {
        m[i * n + i].im = 0.0;
    }
    let mut v = vectors.then(|| CMatrix::identity(n, n).as_slice().to_vec());
    let scale = frobenius(&m);
    if n < 2 || scale == 0.0 {
        return Ok((m, v));
    }

    let tol = f64::EPSILON * scale;
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&m, n) <= tol {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(&mut m, v.as_deref_mut(), n, p, q, tol / n as f64);
            }
        }
    }
    let off = off_diagonal_norm(&m, n);
    if off > 1e-10 * scale {
        return Err(Error::Numeric(format!(
            "Jacobi sweeps did not converge (off-diagonal norm {off:e})"
        )));
    }
    Ok((m, v))
}

fn frobenius(m: &[C64]) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn off_diagonal_norm(m: &[C64], n: usize) -> f64 {
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                s += m[j * n + i].norm_sqr();
            }
        }
    }
    s.sqrt()
}

fn two_columns(m: &mut [C64], n: usize, p: usize, q: usize) -> (&mut [C64], &mut [C64]) {
    debug_assert!(p < q);
    let (lo, hi) = m.split_at_mut(q * n);
    (&mut lo[p * n..p * n + n], &mut hi[..n])
}

/// Annihilates `m[p,q]` with the unitary `U` whose (p,q) block is
/// `[[c, s], [-s e^{-iα}, c e^{-iα}]]`, `m[p,q] = |m[p,q]| e^{iα}`.
///
/// Only columns p and q of `M U` are formed; rows p and q of `U^H M U`
/// follow by Hermitian symmetry.
fn rotate(m: &mut [C64], v: Option<&mut [C64]>, n: usize, p: usize, q: usize, skip: f64) {
    let apq = m[q * n + p];
    let r = apq.norm();
    if r <= skip {
        return;
    }
    let phase = apq / r; // e^{iα}
    let app = m[p * n + p].re;
    let aqq = m[q * n + q].re;
    let tau = (aqq - app) / (2.0 * r);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let es = phase.conj() * s; // s e^{-iα}
    let ec = phase.conj() * c; // c e^{-iα}

    {
        let (cp, cq) = two_columns(m, n, p, q);
        for k in 0..n {
            let x = cp[k];
            let y = cq[k];
            cp[k] = x * c - y * es;
            cq[k] = x * s + y * ec;
        }
    }
    // rows p, q of U^H W; off the 2x2 block they mirror columns p, q
    for k in 0..n {
        if k != p && k != q {
            m[k * n + p] = m[p * n + k].conj();
            m[k * n + q] = m[q * n + k].conj();
        }
    }
    m[p * n + p] = C64::new(app - t * r, 0.0);
    m[q * n + q] = C64::new(aqq + t * r, 0.0);
    m[q * n + p] = C64::new(0.0, 0.0);
    m[p * n + q] = C64::new(0.0, 0.0);

    if let Some(v) = v {
        let (vp, vq) = two_columns(v, n, p, q);
        for k in 0..n {
            let x = vp[k];
            let y = vq[k];
            vp[k] = x * c - y * es;
            vq[k] = x * s + y * ec;
        }
    }
}

fn finish(m: &[C64], n: usize, v: CMatrix) -> (Vec<f64>, CMatrix) {
    let diag: Vec<f64> = (0..n).map(|i| m[i * n + i].re).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps the original order among ties
    order.sort_by(|&a, &b| diag[b].total_cmp(&diag[a]));
    let values = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.column(src).clone_owned();
        let mut best = 0;
        for k in 1..n {
            if col[k].norm() > col[best].norm() * (1.0 + 1e-12) {
                best = k;
            }
        }
        let pivot = col[best];
        if pivot.norm() > 0.0 {
            col *= pivot.conj() / pivot.norm();
        }
        vectors.set_column(dst, &col);
    }
    (values, vectors)
}

/// Exchange matrix `J` (ones on the anti-diagonal).
pub fn exchange(n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |i, j| {
        if i + j + 1 == n {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Eigenvalues of a small general complex matrix via its Schur form.
pub fn general_eigenvalues(a: &CMatrix) -> Result<Vec<C64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::Input("matrix is not square".into()));
    }
    if a.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }
    let schur = nalgebra::Schur::try_new(a.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numeric("Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_hermitian(n: usize, rng: &mut impl Rng) -> CMatrix {
        let x = CMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        (&x + x.adjoint()) * C64::new(0.5, 0.0)
    }

    fn reconstruct(w: &[f64], v: &CMatrix) -> CMatrix {
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            w.len(),
            w.iter().map(|&x| C64::new(x, 0.0)),
        ));
        v * d * v.adjoint()
    }

    #[test]
    fn identity_and_diagonal() {
        let (w, _) = jacobi_eigh(&CMatrix::identity(4, 4)).unwrap();
        assert_eq!(w, vec![1.0; 4]);
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(1.0, 0.0),
            C64::new(3.0, 0.0),
        ]));
        let (w, v) = jacobi_eigh(&d).unwrap();
        assert_eq!(w, vec![3.0, 1.0]);
        assert!((v[(1, 0)] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((v[(0, 1)] - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn residual_and_unitarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 2, 3, 8, 17, 40] {
            let a = random_hermitian(n, &mut rng);
            let (w, v) = jacobi_eigh(&a).unwrap();
            assert!(w.windows(2).all(|p| p[0] >= p[1]));
            let res = (reconstruct(&w, &v) - &a).norm();
            assert!(res <= 1e-8 * a.norm().max(1e-300), "n={n} res={res}");
            let u = v.adjoint() * &v - CMatrix::identity(n, n);
            assert!(u.norm() <= 1e-9 * n as f64);
            let tr: f64 = (0..n).map(|i| a[(i, i)].re).sum();
            assert!((w.iter().sum::<f64>() - tr).abs() <= 1e-9 * tr.abs().max(1.0));
        }
    }

    #[test]
    fn values_only_path_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2, 5, 33] {
            let a = random_hermitian(n, &mut rng);
            let (w, _) = jacobi_eigh(&a).unwrap();
            assert_eq!(w, jacobi_eigvals(&a).unwrap());
        }
    }

    #[test]
    fn identity_shift_shifts_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let n = rng.gen_range(2..20);
            let a = random_hermitian(n, &mut rng);
            let c: f64 = rng.gen_range(-5.0..5.0);
            let b = &a + CMatrix::identity(n, n) * C64::new(c, 0.0);
            let (wa, _) = jacobi_eigh(&a).unwrap();
            let (wb, _) = jacobi_eigh(&b).unwrap();
            for (x, y) in wa.iter().zip(&wb) {
                assert!((x + c - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn pivot_component_real_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_hermitian(6, &mut rng);
        let (_, v) = jacobi_eigh(&a).unwrap();
        for j in 0..6 {
            let col = v.column(j);
            let k = (0..6).max_by(|&a, &b| col[a].norm().total_cmp(&col[b].norm())).unwrap();
            assert!(col[k].im.abs() < 1e-12 && col[k].re > 0.0);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let mut a = CMatrix::identity(3, 3);
        a[(0, 1)] = C64::new(f64::NAN, 0.0);
        assert!(matches!(jacobi_eigh(&a), Err(Error::Numeric(_))));
        assert!(jacobi_eigh(&CMatrix::identity(300, 300)).is_err());
        assert!(jacobi_eigh(&CMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn general_eigenvalues_of_similar_diagonal() {
        let d = nalgebra::DVector::from_vec(vec![
            C64::from_polar(1.0, 0.3),
            C64::from_polar(1.0, -2.0),
            C64::from_polar(0.5, 1.0),
        ]);
        let t = CMatrix::from_fn(3, 3, |i, j| C64::new((i * 3 + j) as f64 * 0.1 + 1.0, (i as f64) - (j as f64) * 0.2));
        let t = t + CMatrix::identity(3, 3) * C64::new(2.0, 0.0);
        let a = &t * CMatrix::from_diagonal(&d) * t.clone().try_inverse().unwrap();
        let mut ev = general_eigenvalues(&a).unwrap();
        ev.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
        let mut want: Vec<C64> = d.iter().copied().collect();
        want.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
        for (x, y) in ev.iter().zip(&want) {
            assert!((x - y).norm() < 1e-10);
        }
    }
}
