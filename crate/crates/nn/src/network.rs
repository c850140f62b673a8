//! Layer stacks, the two reference architectures and the model file format.
//!
//! Model file: `b"H2ADNN01"`, `u32` layer count, then per layer a `u8` tag,
//! its `u32` dimensions and its `f64` values, all little-endian.
//!
//! | tag | layer       | dims                 | values                               |
//! |-----|-------------|----------------------|--------------------------------------|
//! | 1   | standardize | n                    | mean[n], inv_std[n]                  |
//! | 2   | dense       | inputs, outputs      | W (row-major), b                     |
//! | 3   | conv1d      | in, out, kernel      | W (out, in, k), b                    |
//! | 4   | batch-norm  | channels             | gamma, beta, running mean, running var, momentum, eps |
//! | 5   | relu        |                      |                                      |
//! | 6   | dropout     |                      | rate                                 |
//! | 7   | max-pool    | size                 |                                      |
//! | 8   | avg-pool    |                      |                                      |

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::layers::{
    softmax, BatchNorm, Conv1d, Dense, Dropout, GlobalAvgPool, Layer, MaxPool, Param, Relu, Standardize,
};
use crate::tensor::Tensor;
use crate::{Error, Result};

pub const MODEL_MAGIC: &[u8; 8] = b"H2ADNN01";

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Layer>,
}

impl Network {
    /// `Standardize → (Dense → ReLU → Dropout)* → Dense`, He-initialised.
    pub fn dense(inputs: usize, hidden: &[usize], classes: usize, dropout: f64, seed: u64) -> Result<Self> {
        if inputs == 0 || classes < 2 || hidden.contains(&0) {
            return Err(Error::Config("dense network needs positive widths and at least 2 classes".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = vec![Layer::Standardize(Standardize::identity(inputs))];
        let mut prev = inputs;
        for &h in hidden {
            layers.push(Layer::Dense(Dense::new(prev, h, &mut rng)));
            layers.push(Layer::Relu(Relu::default()));
            layers.push(Layer::Dropout(Dropout::new(dropout, rng.gen())?));
            prev = h;
        }
        layers.push(Layer::Dense(Dense::new(prev, classes, &mut rng)));
        Ok(Self { layers })
    }

    /// `Standardize → Conv(1→64) → BN → ReLU → MaxPool(2) → Conv(64→128) →
    /// ReLU → GAP → Dense(128→classes)`, kernel 3, "same" padding.
    pub fn cnn(len: usize, classes: usize, seed: u64) -> Result<Self> {
        if len < 2 || classes < 2 {
            return Err(Error::Config("CNN needs input length >= 2 and at least 2 classes".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            layers: vec![
                Layer::Standardize(Standardize::identity(len)),
                Layer::Conv1d(Conv1d::new(1, 64, 3, &mut rng)?),
                Layer::BatchNorm(BatchNorm::new(64)),
                Layer::Relu(Relu::default()),
                Layer::MaxPool(MaxPool::new(2)?),
                Layer::Conv1d(Conv1d::new(64, 128, 3, &mut rng)?),
                Layer::Relu(Relu::default()),
                Layer::GlobalAvgPool(GlobalAvgPool::default()),
                Layer::Dense(Dense::new(128, classes, &mut rng)),
            ],
        })
    }

    pub fn is_convolutional(&self) -> bool {
        self.layers.iter().any(|l| matches!(l, Layer::Conv1d(_)))
    }

    /// Features per sample expected at the input.
    pub fn input_size(&self) -> Result<usize> {
        match self.layers.first() {
            Some(Layer::Standardize(s)) => Ok(s.mean.len()),
            Some(Layer::Dense(d)) => Ok(d.inputs),
            Some(Layer::Conv1d(c)) if c.in_channels == 1 => Err(Error::Input("input length not fixed".into())),
            _ => Err(Error::Input("cannot infer input size".into())),
        }
    }

    pub fn classes(&self) -> Result<usize> {
        match self.layers.last() {
            Some(Layer::Dense(d)) => Ok(d.outputs),
            _ => Err(Error::Input("network does not end in a dense layer".into())),
        }
    }

    /// Shapes a batch of flat samples into the tensor layout this network
    /// consumes: `(B, n, 1)` for dense stacks, `(B, 1, n)` for CNNs.
    pub fn batch_tensor(&self, samples: &[&[f64]]) -> Result<Tensor> {
        let n = self.input_size()?;
        let mut data = Vec::with_capacity(samples.len() * n);
        for s in samples {
            if s.len() != n {
                return Err(Error::Input(format!("expected {n} input values, got {}", s.len())));
            }
            data.extend_from_slice(s);
        }
        if self.is_convolutional() {
            Tensor::from_vec(data, samples.len(), 1, n)
        } else {
            Tensor::from_vec(data, samples.len(), n, 1)
        }
    }

    pub fn set_standardizer(&mut self, s: Standardize) -> Result<()> {
        match self.layers.first_mut() {
            Some(Layer::Standardize(old)) if old.mean.len() == s.mean.len() => {
                *old = s;
                Ok(())
            }
            _ => Err(Error::Input("standardizer does not match the input layer".into())),
        }
    }

    pub fn reseed_dropout(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in &mut self.layers {
            if let Layer::Dropout(d) = l {
                d.reseed(rng.gen());
            }
        }
    }

    /// Training-mode forward pass returning logits; caches activations.
    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        for l in &mut self.layers {
            h = l.forward(&h, true)?;
        }
        Ok(h)
    }

    /// Inference-mode logits.
    pub fn logits(&self, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        for l in &self.layers {
            h = l.infer(&h)?;
        }
        Ok(h)
    }

    pub fn predict_proba(&self, x: &Tensor) -> Result<Tensor> {
        Ok(softmax(&self.logits(x)?))
    }

    /// Class index with the largest probability, per sample.
    pub fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        let logits = self.logits(x)?;
        Ok((0..logits.batch)
            .map(|b| {
                let s = logits.sample(b);
                (0..s.len()).fold(0, |best, i| if s[i] > s[best] { i } else { best })
            })
            .collect())
    }

    /// Backpropagates the logit gradient; parameter gradients accumulate.
    pub fn backward(&mut self, grad: &Tensor) -> Result<()> {
        let mut g = grad.clone();
        for l in self.layers.iter_mut().rev() {
            g = l.backward(&g)?;
        }
        Ok(())
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().flat_map(|l| l.params()).map(|p| p.value.len()).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MODEL_MAGIC);
        w.u32(self.layers.len());
        for l in &self.layers {
            match l {
                Layer::Standardize(s) => {
                    w.tag(1);
                    w.u32(s.mean.len());
                    w.f64s(&s.mean);
                    w.f64s(&s.inv_std);
                }
                Layer::Dense(d) => {
                    w.tag(2);
                    w.u32(d.inputs);
                    w.u32(d.outputs);
                    w.f64s(&d.weight.value);
                    w.f64s(&d.bias.value);
                }
                Layer::Conv1d(c) => {
                    w.tag(3);
                    w.u32(c.in_channels);
                    w.u32(c.out_channels);
                    w.u32(c.kernel);
                    w.f64s(&c.weight.value);
                    w.f64s(&c.bias.value);
                }
                Layer::BatchNorm(b) => {
                    w.tag(4);
                    w.u32(b.channels);
                    w.f64s(&b.gamma.value);
                    w.f64s(&b.beta.value);
                    w.f64s(&b.running_mean);
                    w.f64s(&b.running_var);
                    w.f64s(&[b.momentum, b.eps]);
                }
                Layer::Relu(_) => w.tag(5),
                Layer::Dropout(d) => {
                    w.tag(6);
                    w.f64s(&[d.rate]);
                }
                Layer::MaxPool(m) => {
                    w.tag(7);
                    w.u32(m.size);
                }
                Layer::GlobalAvgPool(_) => w.tag(8),
            }
        }
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MODEL_MAGIC {
            return Err(Error::Input("not a model file (bad magic)".into()));
        }
        let count = r.u32()?;
        let mut layers = Vec::with_capacity(count.min(1024));
        for i in 0..count {
            let layer = match r.take(1)?[0] {
                1 => {
                    let n = r.u32()?;
                    Layer::Standardize(Standardize {
                        mean: r.f64s(n)?,
                        inv_std: r.f64s(n)?,
                    })
                }
                2 => {
                    let (i, o) = (r.u32()?, r.u32()?);
                    let weight = Param::new(r.f64s(i * o)?);
                    let bias = Param::new(r.f64s(o)?);
                    Layer::Dense(Dense::from_params(i, o, weight, bias))
                }
                3 => {
                    let (ci, co, k) = (r.u32()?, r.u32()?, r.u32()?);
                    if k % 2 == 0 {
                        return Err(Error::Input("even convolution kernel in model file".into()));
                    }
                    let weight = Param::new(r.f64s(co * ci * k)?);
                    let bias = Param::new(r.f64s(co)?);
                    Layer::Conv1d(Conv1d::from_params(ci, co, k, weight, bias))
                }
                4 => {
                    let c = r.u32()?;
                    let mut b = BatchNorm::new(c);
                    b.gamma = Param::new(r.f64s(c)?);
                    b.beta = Param::new(r.f64s(c)?);
                    b.running_mean = r.f64s(c)?;
                    b.running_var = r.f64s(c)?;
                    let me = r.f64s(2)?;
                    b.momentum = me[0];
                    b.eps = me[1];
                    Layer::BatchNorm(b)
                }
                5 => Layer::Relu(Relu::default()),
                6 => Layer::Dropout(Dropout::new(r.f64s(1)?[0], i as u64)?),
                7 => Layer::MaxPool(MaxPool::new(r.u32()?)?),
                8 => Layer::GlobalAvgPool(GlobalAvgPool::default()),
                t => return Err(Error::Input(format!("unknown layer tag {t} at layer {i}"))),
            };
            layers.push(layer);
        }
        if r.pos != bytes.len() {
            return Err(Error::Input("trailing bytes after last layer".into()));
        }
        Ok(Self { layers })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_bytes())?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn tag(&mut self, t: u8) {
        self.0.push(t);
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        for x in v {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Input("model file truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Input("model file dims overflow".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }
}
