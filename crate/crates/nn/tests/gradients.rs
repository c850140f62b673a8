use h2ad_nn::layers::{
    softmax_cross_entropy, BatchNorm, Conv1d, Dense, GlobalAvgPool, Layer, MaxPool, Relu, Standardize,
};
use h2ad_nn::network::Network;
use h2ad_nn::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_tensor(rng: &mut ChaCha8Rng, b: usize, c: usize, l: usize) -> Tensor {
    Tensor::from_vec((0..b * c * l).map(|_| rng.gen_range(-1.0..1.0)).collect(), b, c, l).unwrap()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-12)
}

/// Loss `sum(r * layer(x))`; compares input and parameter gradients with
/// central differences.
fn check_layer(mut layer: Layer, x: Tensor, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = layer.forward(&x, true).unwrap();
    let r = random_tensor(&mut rng, y.batch, y.channels, y.len);
    let loss = |l: &mut Layer, x: &Tensor| -> f64 {
        let y = l.forward(x, true).unwrap();
        y.data.iter().zip(&r.data).map(|(a, b)| a * b).sum()
    };
    for p in layer.params_mut() {
        p.zero_grad();
    }
    layer.forward(&x, true).unwrap();
    let gx = layer.backward(&r).unwrap();

    let h = 1e-6;
    let mut num = Vec::new();
    for i in 0..x.data.len() {
        let mut xp = x.clone();
        xp.data[i] += h;
        let mut xm = x.clone();
        xm.data[i] -= h;
        num.push((loss(&mut layer, &xp) - loss(&mut layer, &xm)) / (2.0 * h));
    }
    let mut worst = rel_err(&gx.data, &num);

    let n_params = layer.params().len();
    for pi in 0..n_params {
        let analytic = layer.params()[pi].grad.clone();
        let mut num = Vec::new();
        for i in 0..analytic.len() {
            let orig = layer.params()[pi].value[i];
            layer.params_mut()[pi].value[i] = orig + h;
            let lp = loss(&mut layer, &x);
            layer.params_mut()[pi].value[i] = orig - h;
            let lm = loss(&mut layer, &x);
            layer.params_mut()[pi].value[i] = orig;
            num.push((lp - lm) / (2.0 * h));
        }
        worst = worst.max(rel_err(&analytic, &num));
    }
    worst
}

#[test]
fn dense_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let layer = Layer::Dense(Dense::new(6, 4, &mut rng));
    let e = check_layer(layer, random_tensor(&mut rng, 3, 6, 1), 2);
    assert!(e < 1e-5, "{e}");
}

#[test]
fn conv_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (ci, co, k, l) in [(1, 4, 3, 7), (3, 5, 3, 6), (2, 2, 5, 4)] {
        let layer = Layer::Conv1d(Conv1d::new(ci, co, k, &mut rng).unwrap());
        let e = check_layer(layer, random_tensor(&mut rng, 2, ci, l), 4);
        assert!(e < 1e-5, "({ci},{co},{k},{l}): {e}");
    }
}

#[test]
fn batch_norm_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut bn = BatchNorm::new(3);
    bn.gamma.value = vec![0.5, 1.5, -1.0];
    bn.beta.value = vec![0.1, -0.2, 0.3];
    let e = check_layer(Layer::BatchNorm(bn), random_tensor(&mut rng, 4, 3, 5), 6);
    assert!(e < 1e-5, "{e}");
}

#[test]
fn pooling_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let e = check_layer(Layer::MaxPool(MaxPool::new(2).unwrap()), random_tensor(&mut rng, 2, 3, 9), 8);
    assert!(e < 1e-5, "max-pool {e}");
    let e = check_layer(Layer::GlobalAvgPool(GlobalAvgPool::default()), random_tensor(&mut rng, 2, 3, 9), 9);
    assert!(e < 1e-5, "avg-pool {e}");
}

#[test]
fn relu_and_standardize_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let e = check_layer(Layer::Relu(Relu::default()), random_tensor(&mut rng, 3, 4, 2), 11);
    assert!(e < 1e-5, "relu {e}");
    let s = Standardize {
        mean: vec![0.3, -1.0, 2.0],
        inv_std: vec![2.0, 0.5, 1.3],
    };
    let e = check_layer(Layer::Standardize(s), random_tensor(&mut rng, 2, 3, 1), 12);
    assert!(e < 1e-5, "standardize {e}");
}

#[test]
fn softmax_cross_entropy_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let z = random_tensor(&mut rng, 4, 5, 1);
    let labels = [0, 3, 4, 1];
    let (_, g) = softmax_cross_entropy(&z, &labels).unwrap();
    let h = 1e-6;
    let num: Vec<f64> = (0..z.data.len())
        .map(|i| {
            let mut p = z.clone();
            p.data[i] += h;
            let mut m = z.clone();
            m.data[i] -= h;
            (softmax_cross_entropy(&p, &labels).unwrap().0 - softmax_cross_entropy(&m, &labels).unwrap().0) / (2.0 * h)
        })
        .collect();
    let e = rel_err(&g.data, &num);
    assert!(e < 1e-5, "{e}");
}

/// Cross-entropy gradient of every parameter of a 5-4-3 network.
#[test]
fn small_network_end_to_end() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut net = Network::dense(5, &[4], 3, 0.0, 15).unwrap();
    let x = random_tensor(&mut rng, 6, 5, 1);
    let labels = [0, 1, 2, 2, 1, 0];
    net.zero_grad();
    let (_, g) = softmax_cross_entropy(&net.forward(&x).unwrap(), &labels).unwrap();
    net.backward(&g).unwrap();
    let analytic: Vec<Vec<f64>> = net.params_mut().iter().map(|p| p.grad.clone()).collect();
    let h = 1e-6;
    for (pi, a) in analytic.iter().enumerate() {
        let mut num = Vec::new();
        for i in 0..a.len() {
            let orig = net.params_mut()[pi].value[i];
            net.params_mut()[pi].value[i] = orig + h;
            let lp = softmax_cross_entropy(&net.logits(&x).unwrap(), &labels).unwrap().0;
            net.params_mut()[pi].value[i] = orig - h;
            let lm = softmax_cross_entropy(&net.logits(&x).unwrap(), &labels).unwrap().0;
            net.params_mut()[pi].value[i] = orig;
            num.push((lp - lm) / (2.0 * h));
        }
        let e = rel_err(a, &num);
        assert!(e < 1e-5, "param {pi}: {e}");
    }
}

#[test]
fn cnn_end_to_end() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let mut net = Network::cnn(9, 3, 17).unwrap();
    let x = random_tensor(&mut rng, 4, 1, 9);
    let labels = [0, 1, 2, 1];
    net.zero_grad();
    let (_, g) = softmax_cross_entropy(&net.forward(&x).unwrap(), &labels).unwrap();
    net.backward(&g).unwrap();
    let analytic: Vec<Vec<f64>> = net.params_mut().iter().map(|p| p.grad.clone()).collect();
    // training-mode loss so batch statistics are used throughout
    let loss = |net: &mut Network| softmax_cross_entropy(&net.forward(&x).unwrap(), &labels).unwrap().0;
    let h = 1e-6;
    let mut checked = 0;
    for (pi, a) in analytic.iter().enumerate() {
        // a strided subset keeps the check cheap on the wide layers
        for i in (0..a.len()).step_by(1 + a.len() / 40) {
            let orig = net.params_mut()[pi].value[i];
            net.params_mut()[pi].value[i] = orig + h;
            let lp = loss(&mut net);
            net.params_mut()[pi].value[i] = orig - h;
            let lm = loss(&mut net);
            net.params_mut()[pi].value[i] = orig;
            let n = (lp - lm) / (2.0 * h);
            let err = (a[i] - n).abs() / a[i].abs().max(n.abs()).max(1e-4);
            assert!(err < 1e-5, "param {pi}[{i}]: {} vs {n}", a[i]);
            checked += 1;
        }
    }
    assert!(checked > 100);
}
