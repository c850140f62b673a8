use h2ad_nn::features::{extract_features, log_spectrum};
use h2ad_nn::flops::{flops_estimate, ModelSpec};
use h2ad_nn::layers::{softmax, Dropout, GlobalAvgPool, Layer};
use h2ad_nn::network::Network;
use h2ad_nn::tensor::Tensor;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn flat_spectrum_features() {
    let f = extract_features(&[2.5; 8]).unwrap();
    let c = 2.5f64.ln();
    assert!((f.log_max() - c).abs() < 1e-15);
    assert!((f.log_min() - c).abs() < 1e-15);
    assert!((f.log_mean() - c).abs() < 1e-15);
    assert!((f.entropy() - 8f64.ln()).abs() < 1e-12);
    // zero spread hits the log guard
    assert!(f.clamped);
    assert_eq!(f.log_std(), 1e-300f64.ln());
}

#[test]
fn two_value_spectra() {
    let e = std::f64::consts::E;
    let f = extract_features(&[e, 1.0]).unwrap();
    assert!((f.log_max() - 1.0).abs() < 1e-15);
    assert_eq!(f.log_min(), 0.0);
    assert!((f.log_mean() - ((e + 1.0) / 2.0).ln()).abs() < 1e-15);
    assert!(!f.clamped);

    let f = extract_features(&[9.0, 1.0]).unwrap();
    let want = -(0.9f64 * 0.9f64.ln() + 0.1 * 0.1f64.ln());
    assert!((f.entropy() - want).abs() < 1e-12);
    assert!((f.entropy() - 0.3251).abs() < 5e-5);
}

#[test]
fn non_positive_eigenvalues_are_clamped() {
    let f = extract_features(&[3.0, 1.0, 0.0]).unwrap();
    assert!(f.clamped);
    assert_eq!(f.log_min(), 1e-300f64.ln());
    let f = extract_features(&[3.0, -1e-14, 1.0]).unwrap();
    assert!(f.clamped && f.values.iter().all(|v| v.is_finite()));
    assert!(extract_features(&[1.0]).is_err());
    assert!(extract_features(&[1.0, f64::NAN]).is_err());
    assert_eq!(log_spectrum(&[1.0, 0.0])[1], 1e-300f64.ln());
}

#[test]
fn entropy_falls_as_one_eigenvalue_dominates() {
    let mut prev = f64::INFINITY;
    for k in 1..=6 {
        let mut lam = vec![1.0; 20];
        lam[0] = 10f64.powi(k);
        let h = extract_features(&lam).unwrap().entropy();
        assert!(h < prev, "k={k}");
        prev = h;
    }
    assert!(prev < 1e-3);
}

proptest! {
    #[test]
    fn feature_ordering(lam in proptest::collection::vec(1e-6f64..1e6, 2..120)) {
        let f = extract_features(&lam).unwrap();
        prop_assert!(f.log_max() >= f.log_mean() && f.log_mean() >= f.log_min());
        prop_assert!(f.entropy() >= 0.0 && f.entropy() <= (lam.len() as f64).ln() + 1e-12);
    }

    #[test]
    fn softmax_shift_invariant(z in proptest::collection::vec(-30.0f64..30.0, 2..8), c in -500.0f64..500.0) {
        let n = z.len();
        let a = softmax(&Tensor::from_vec(z.clone(), 1, n, 1).unwrap());
        let b = softmax(&Tensor::from_vec(z.iter().map(|v| v + c).collect(), 1, n, 1).unwrap());
        for (x, y) in a.data.iter().zip(&b.data) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn softmax_normalized_over_random_networks() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut net = Network::dense(5, &[64, 64, 64], 4, 0.2, 0).unwrap();
    for trial in 0..10_000u64 {
        if trial % 1000 == 0 {
            net = Network::dense(5, &[64, 64, 64], 4, 0.2, trial).unwrap();
        }
        let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let p = net.predict_proba(&net.batch_tensor(&[&x]).unwrap()).unwrap();
        let s: f64 = p.data.iter().sum();
        assert!((s - 1.0).abs() < 1e-9 && p.data.iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn zero_weights_give_uniform_output() {
    let mut net = Network::dense(5, &[64, 64, 64], 4, 0.2, 1).unwrap();
    for p in net.params_mut() {
        p.value.iter_mut().for_each(|v| *v = 0.0);
    }
    let p = net.predict_proba(&net.batch_tensor(&[&[1.0, -2.0, 3.0, 0.5, 9.0]]).unwrap()).unwrap();
    assert!(p.data.iter().all(|&v| (v - 0.25).abs() < 1e-15));

    let mut cnn = Network::cnn(97, 4, 2).unwrap();
    for p in cnn.params_mut() {
        p.value.iter_mut().for_each(|v| *v = 0.0);
    }
    let p = cnn.predict_proba(&cnn.batch_tensor(&[&[0.0; 97]]).unwrap()).unwrap();
    assert!(p.data.iter().all(|&v| (v - 0.25).abs() < 1e-15));
}

#[test]
fn dropout_identity_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = Tensor::from_vec((0..60).map(|_| rng.gen_range(-1.0..1.0)).collect(), 3, 20, 1).unwrap();
    let mut d = Layer::Dropout(Dropout::new(0.5, 1).unwrap());
    assert_eq!(d.forward(&x, false).unwrap(), x);
    assert_eq!(d.infer(&x).unwrap(), x);
    let mut d0 = Layer::Dropout(Dropout::new(0.0, 1).unwrap());
    assert_eq!(d0.forward(&x, true).unwrap(), x);
    // training mode actually drops and rescales
    let y = d.forward(&x, true).unwrap();
    assert!(y.data.iter().any(|&v| v == 0.0));
    assert!(y.data.iter().zip(&x.data).all(|(a, b)| *a == 0.0 || (a - 2.0 * b).abs() < 1e-15));
    assert!(Dropout::new(1.0, 0).is_err());
}

#[test]
fn average_pool_ignores_position() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let data: Vec<f64> = (0..2 * 3 * 10).map(|_| rng.gen_range(0.0..2.0)).collect();
    let x = Tensor::from_vec(data.clone(), 2, 3, 10).unwrap();
    let mut perm = data;
    for row in perm.chunks_mut(10) {
        row.rotate_left(3);
        row.swap(0, 7);
    }
    let xp = Tensor::from_vec(perm, 2, 3, 10).unwrap();
    let gap = Layer::GlobalAvgPool(GlobalAvgPool::default());
    let a = gap.infer(&x).unwrap();
    let b = gap.infer(&xp).unwrap();
    for (u, v) in a.data.iter().zip(&b.data) {
        assert!((u - v).abs() < 1e-14);
    }
}

#[test]
fn shape_mismatch_is_an_error() {
    let net = Network::dense(5, &[8], 3, 0.0, 0).unwrap();
    assert!(net.batch_tensor(&[&[1.0; 4]]).is_err());
    let t = Tensor::from_vec(vec![0.0; 4], 1, 4, 1).unwrap();
    assert!(net.logits(&t).is_err());
    let cnn = Network::cnn(10, 3, 0).unwrap();
    assert!(cnn.batch_tensor(&[&[0.0; 9]]).is_err());
}

#[test]
fn odd_length_pooling_drops_last() {
    let cnn = Network::cnn(97, 4, 3).unwrap();
    let x = cnn.batch_tensor(&[&[0.5; 97]]).unwrap();
    let mut h = x;
    for l in &cnn.layers[..5] {
        h = l.infer(&h).unwrap();
    }
    assert_eq!((h.channels, h.len), (64, 48));
}

#[test]
fn flop_model() {
    let d = flops_estimate(ModelSpec::Dense { inputs: 5, hidden: 64, classes: 3 });
    assert_eq!(d.flops, 17_408);
    assert!(!d.invalid);
    let c = flops_estimate(ModelSpec::Cnn { len: 97, classes: 3 });
    assert_eq!(c.flops, 2_421_888);
    let z = flops_estimate(ModelSpec::Dense { inputs: 5, hidden: 64, classes: 0 });
    assert_eq!(z.flops, 2 * (320 + 8192));
    assert!(z.invalid);
    assert!(flops_estimate(ModelSpec::Cnn { len: 97, classes: 0 }).invalid);
}

#[test]
fn model_file_round_trip() {
    let dir = std::env::temp_dir().join(format!("h2ad-nn-model-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    for net in [Network::dense(5, &[64, 64, 64], 4, 0.2, 9).unwrap(), Network::cnn(97, 4, 9).unwrap()] {
        let path = dir.join("m.h2adnn");
        net.save(&path).unwrap();
        let back = Network::load(&path).unwrap();
        assert_eq!(back.to_bytes(), net.to_bytes());
        let x: Vec<f64> = (0..net.input_size().unwrap()).map(|i| (i as f64 * 0.37).sin()).collect();
        let t = net.batch_tensor(&[&x]).unwrap();
        assert_eq!(net.logits(&t).unwrap(), back.logits(&t).unwrap());
    }
    let bytes = Network::cnn(16, 3, 1).unwrap().to_bytes();
    assert_eq!(&bytes[..8], b"H2ADNN01");
    assert!(Network::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(Network::from_bytes(&bad).is_err());
    std::fs::remove_dir_all(&dir).ok();
}
