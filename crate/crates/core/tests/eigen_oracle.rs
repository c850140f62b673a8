use h2ad_core::linalg::jacobi_eigh;
use h2ad_core::{CMatrix, C64};
use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_hermitian(n: usize, rng: &mut impl Rng) -> CMatrix {
    let x = CMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    (&x + x.adjoint()) * C64::new(0.5, 0.0)
}

#[test]
fn thousand_random_hermitian_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for t in 0..1000 {
        let n = 1 + (t * 37) % 64;
        let mut a = random_hermitian(n, &mut rng);
        if t % 5 == 0 {
            // low-rank plus small identity, like a sample covariance
            let v = CMatrix::from_fn(n, 2, |_, _| C64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)));
            a = &v * v.adjoint() + CMatrix::identity(n, n) * C64::new(1e-3, 0.0);
        }
        let (w, v) = jacobi_eigh(&a).unwrap();
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, w.iter().map(|&x| C64::new(x, 0.0))));
        let res = (&v * d * v.adjoint() - &a).norm() / a.norm();
        worst = worst.max(res);
        assert!(res <= 1e-8, "trial {t} n={n}: residual {res:e}");

        let mut want: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
        want.sort_by(|x, y| y.total_cmp(x));
        for (x, y) in w.iter().zip(&want) {
            assert!((x - y).abs() <= 1e-9 * a.norm().max(1.0), "trial {t}: {x} vs {y}");
        }
    }
    assert!(worst < 1e-8);
}
