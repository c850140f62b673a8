//! Mini-batch SGD with momentum on softmax cross-entropy.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use h2ad_core::signal::mix_seed;

use crate::layers::{softmax_cross_entropy, Standardize};
use crate::network::Network;
use crate::{Error, Result};

/// Flat input rows with class indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Split {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl Split {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainParams {
    pub lr: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch: usize,
    /// The learning rate is multiplied by `lr_decay` every `decay_every` epochs.
    pub decay_every: usize,
    pub lr_decay: f64,
    /// Refit the input standardizer on the training split before the first epoch.
    pub fit_standardizer: bool,
    /// Keep the parameters with the lowest validation loss seen.
    pub keep_best: bool,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            lr: 1e-2,
            momentum: 0.9,
            epochs: 60,
            batch: 32,
            decay_every: 20,
            lr_decay: 0.5,
            fit_standardizer: true,
            keep_best: true,
            seed: 0,
        }
    }
}

/// Losses per epoch; index 0 is the untrained network.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossCurve {
    pub train: Vec<f64>,
    pub val: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub curve: LossCurve,
    /// Epoch whose parameters were kept (0 means the initial ones).
    pub best_epoch: usize,
    pub val_accuracy: f64,
}

/// Mean cross-entropy and accuracy in inference mode.
pub fn evaluate(net: &Network, split: &Split) -> Result<(f64, f64)> {
    if split.is_empty() {
        return Err(Error::Input("empty split".into()));
    }
    let (mut loss, mut correct) = (0.0, 0usize);
    for (rows, labels) in split.inputs.chunks(256).zip(split.labels.chunks(256)) {
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let x = net.batch_tensor(&refs)?;
        let logits = net.logits(&x)?;
        let (l, _) = softmax_cross_entropy(&logits, labels)?;
        loss += l * rows.len() as f64;
        let pred = (0..logits.batch).map(|b| {
            let s = logits.sample(b);
            (0..s.len()).fold(0, |best, i| if s[i] > s[best] { i } else { best })
        });
        correct += pred.zip(labels).filter(|(p, l)| p == *l).count();
    }
    let n = split.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

pub fn train(net: &mut Network, train: &Split, val: &Split, hp: &TrainParams) -> Result<TrainReport> {
    if train.is_empty() {
        return Err(Error::Input("training split is empty".into()));
    }
    if val.is_empty() {
        return Err(Error::Input("validation split is empty".into()));
    }
    if train.inputs.len() != train.labels.len() || val.inputs.len() != val.labels.len() {
        return Err(Error::Input("inputs and labels differ in length".into()));
    }
    if hp.batch == 0 || !(hp.lr > 0.0) {
        return Err(Error::Config("batch size and learning rate must be positive".into()));
    }
    if hp.fit_standardizer {
        net.set_standardizer(Standardize::fit(&train.inputs)?)?;
    }
    net.reseed_dropout(mix_seed(hp.seed, 0));

    let (l0, _) = evaluate(net, train)?;
    let (v0, _) = evaluate(net, val)?;
    let mut curve = LossCurve {
        train: vec![l0],
        val: vec![v0],
    };
    let mut best = (v0, 0, net.clone());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut lr = hp.lr;

    for epoch in 1..=hp.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(hp.seed, epoch as u64));
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for (bi, idx) in order.chunks(hp.batch).enumerate() {
            let refs: Vec<&[f64]> = idx.iter().map(|&i| train.inputs[i].as_slice()).collect();
            let labels: Vec<usize> = idx.iter().map(|&i| train.labels[i]).collect();
            let x = net.batch_tensor(&refs)?;
            net.zero_grad();
            let logits = net.forward(&x)?;
            let (loss, grad) = softmax_cross_entropy(&logits, &labels)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "loss became {loss} at epoch {epoch}, batch {bi} (lr {lr:e}); lower the learning rate"
                )));
            }
            sum += loss * idx.len() as f64;
            net.backward(&grad)?;
            for p in net.params_mut() {
                for ((v, w), g) in p.velocity.iter_mut().zip(p.value.iter_mut()).zip(&p.grad) {
                    *v = hp.momentum * *v - lr * g;
                    *w += *v;
                }
            }
        }
        let (vl, va) = evaluate(net, val)?;
        curve.train.push(sum / train.len() as f64);
        curve.val.push(vl);
        log::debug!("epoch {epoch}: train {:.4} val {vl:.4} acc {va:.3}", sum / train.len() as f64);
        if vl < best.0 {
            best = (vl, epoch, net.clone());
        }
        if hp.decay_every > 0 && epoch % hp.decay_every == 0 {
            lr *= hp.lr_decay;
        }
    }

    let best_epoch = if hp.keep_best {
        *net = best.2;
        best.1
    } else {
        hp.epochs
    };
    let (_, val_accuracy) = evaluate(net, val)?;
    Ok(TrainReport {
        curve,
        best_epoch,
        val_accuracy,
    })
}
