use h2ad_core::array::ArrayConfig;
use h2ad_core::crlb::{covariance_derivative, crlb, fim, model_covariance};
use h2ad_core::signal::{generate_group_snapshots, Combining, SourceScene};
use h2ad_core::spectral::sample_covariance;
use h2ad_core::{CMatrix, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn doa_cfg() -> ArrayConfig {
    ArrayConfig::half_wavelength(16, vec![7, 13, 17]).unwrap()
}

fn with_angle(scene: &SourceScene, i: usize, theta: f64) -> SourceScene {
    let mut s = scene.clone();
    s.angles[i] = theta;
    s
}

#[test]
fn derivative_matches_central_differences() {
    let cfg = doa_cfg();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let h = 1e-6;
    for _ in 0..20 {
        let angles = vec![rng.gen_range(-1.2..-0.1), rng.gen_range(0.1..1.2)];
        let scene = SourceScene::new(angles, rng.gen_range(0.1..5.0), 1.0, 100, 0).unwrap();
        for q in 0..3 {
            for i in 0..2 {
                let an = covariance_derivative(&cfg, &scene, q, i).unwrap();
                let plus = model_covariance(&cfg, &with_angle(&scene, i, scene.angles[i] + h), q).unwrap().data;
                let minus = model_covariance(&cfg, &with_angle(&scene, i, scene.angles[i] - h), q).unwrap().data;
                let fd = (plus - minus) * C64::new(0.5 / h, 0.0);
                let rel = (&an - fd).norm() / an.norm();
                assert!(rel < 1e-6, "q={q} i={i} rel={rel:e}");
            }
        }
    }
}

/// Trace formula evaluated with explicit inverses and full products.
fn slow_fim(cfg: &ArrayConfig, scene: &SourceScene) -> Vec<Vec<f64>> {
    let n = scene.num_sources();
    let mut f = vec![vec![0.0; n]; n];
    for q in 0..cfg.num_groups() {
        let r = model_covariance(cfg, scene, q).unwrap().data;
        let inv = r.try_inverse().unwrap();
        let d: Vec<CMatrix> = (0..n).map(|i| covariance_derivative(cfg, scene, q, i).unwrap()).collect();
        for p in 0..n {
            for s in 0..n {
                f[p][s] += (&inv * &d[p] * &inv * &d[s]).trace().re;
            }
        }
    }
    f
}

#[test]
fn fim_matches_slow_evaluator_and_is_psd() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for t in 0..100 {
        let m: Vec<usize> = [3usize, 5, 7, 11].iter().copied().take(rng.gen_range(1..4)).collect();
        let cfg = ArrayConfig::half_wavelength(rng.gen_range(4..10), m).unwrap();
        let a = rng.gen_range(1..4);
        let angles: Vec<f64> = (0..a).map(|i| -1.0 + 0.7 * i as f64 + rng.gen_range(0.0..0.5)).collect();
        let scene = SourceScene::with_snr_db(angles, rng.gen_range(-10.0..10.0), 50, 0).unwrap();
        let f = fim(&cfg, &scene).unwrap();
        let slow = slow_fim(&cfg, &scene);
        for p in 0..a {
            for s in 0..a {
                let x = f.entries[(p, s)];
                assert!((x - slow[p][s]).abs() <= 1e-8 * slow[p][p].abs().max(1e-12), "scene {t}");
                assert_eq!(x, f.entries[(s, p)]);
            }
        }
        let ev = f.entries.clone().symmetric_eigen().eigenvalues;
        let scale = f.entries.norm();
        assert!(ev.iter().all(|&l| l >= -1e-9 * scale), "scene {t} not PSD");
    }
}

#[test]
fn coupling_decays_with_group_width() {
    let scene = SourceScene::with_snr_db(vec![11f64.to_radians(), 23f64.to_radians()], 0.0, 200, 0).unwrap();
    let mut prev = f64::INFINITY;
    for k in [4usize, 8, 16, 32, 64] {
        let cfg = ArrayConfig::half_wavelength(k, vec![1]).unwrap();
        let c = fim(&cfg, &scene).unwrap().coupling(0, 1);
        assert!(c < prev, "K={k}: {c} !< {prev}");
        prev = c;
    }
    assert!(prev < 0.05);
}

#[test]
fn monte_carlo_covariance_consistent_with_model() {
    let cfg = doa_cfg();
    let scene = SourceScene::with_snr_db(vec![11f64.to_radians(), 23f64.to_radians()], 0.0, 100_000, 9).unwrap();
    for q in 0..3 {
        let y = generate_group_snapshots(&cfg, &scene, q, Combining::Analog).unwrap();
        let emp = sample_covariance(&y).unwrap().data;
        let model = model_covariance(&cfg, &scene, q).unwrap().data;
        let rel = (&emp - &model).norm() / model.norm();
        assert!(rel < 0.03, "group {q}: {rel}");
    }
}

#[test]
fn symmetric_scene_gives_even_bound() {
    let cfg = doa_cfg();
    for deg in [5.0f64, 20.0, 40.0] {
        let t = deg.to_radians();
        let s = SourceScene::with_snr_db(vec![-t, t], -5.0, 200, 0).unwrap();
        let b = crlb(&cfg, &s, 200, false).unwrap().bounds;
        assert!((b[0] - b[1]).abs() <= 1e-9 * b[0]);
    }
}
