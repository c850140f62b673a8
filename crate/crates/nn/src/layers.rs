//! Layers with explicit forward/backward passes.
//!
//! `forward` caches what `backward` needs; `backward` takes the gradient of
//! the loss with respect to the layer output, accumulates parameter
//! gradients and returns the gradient with respect to the input.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::tensor::Tensor;
use crate::{Error, Result};

/// A trainable array with its gradient and momentum buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
    pub velocity: Vec<f64>,
}

impl Param {
    pub fn new(value: Vec<f64>) -> Self {
        let n = value.len();
        Self {
            value,
            grad: vec![0.0; n],
            velocity: vec![0.0; n],
        }
    }

    fn he(n: usize, fan_in: usize, rng: &mut ChaCha8Rng) -> Self {
        let sd = (2.0 / fan_in as f64).sqrt();
        let dist = Normal::new(0.0, sd).expect("positive sd");
        Self::new((0..n).map(|_| dist.sample(rng)).collect())
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }
}

fn shape_error(layer: &str, want: usize, got: usize) -> Error {
    Error::Input(format!("{layer} expects {want} input features per sample, got {got}"))
}

/// Fixed per-feature affine map `(x - mean) * inv_std`, fitted on training
/// data and stored with the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardize {
    pub mean: Vec<f64>,
    pub inv_std: Vec<f64>,
}

impl Standardize {
    pub fn identity(n: usize) -> Self {
        Self {
            mean: vec![0.0; n],
            inv_std: vec![1.0; n],
        }
    }

    /// Per-feature mean and population std; constant features keep scale 1.
    pub fn fit(samples: &[Vec<f64>]) -> Result<Self> {
        let first = samples.first().ok_or_else(|| Error::Input("no samples to fit".into()))?;
        let n = first.len();
        let m = samples.len() as f64;
        let mut mean = vec![0.0; n];
        for s in samples {
            if s.len() != n {
                return Err(Error::Input("ragged samples".into()));
            }
            for (a, x) in mean.iter_mut().zip(s) {
                *a += x / m;
            }
        }
        let mut var = vec![0.0; n];
        for s in samples {
            for ((v, x), mu) in var.iter_mut().zip(s).zip(&mean) {
                *v += (x - mu).powi(2) / m;
            }
        }
        let inv_std = var
            .iter()
            .map(|v| if *v > 1e-24 { 1.0 / v.sqrt() } else { 1.0 })
            .collect();
        Ok(Self { mean, inv_std })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let n = self.mean.len();
        if x.sample_size() != n {
            return Err(shape_error("standardize", n, x.sample_size()));
        }
        let mut y = x.clone();
        for b in 0..x.batch {
            for ((v, m), s) in y.sample_mut(b).iter_mut().zip(&self.mean).zip(&self.inv_std) {
                *v = (*v - m) * s;
            }
        }
        Ok(y)
    }

    fn backward(&self, g: &Tensor) -> Tensor {
        let mut out = g.clone();
        for b in 0..g.batch {
            for (v, s) in out.sample_mut(b).iter_mut().zip(&self.inv_std) {
                *v *= s;
            }
        }
        out
    }
}

/// Fully connected layer on the flattened sample: `y = W x + b`, `W` is
/// `outputs × inputs` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Param,
    pub bias: Param,
    cache: Option<Tensor>,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        Self::from_params(
            inputs,
            outputs,
            Param::he(inputs * outputs, inputs, rng),
            Param::new(vec![0.0; outputs]),
        )
    }

    pub fn from_params(inputs: usize, outputs: usize, weight: Param, bias: Param) -> Self {
        Self {
            inputs,
            outputs,
            weight,
            bias,
            cache: None,
        }
    }

    fn forward(&mut self, x: &Tensor, train: bool) -> Result<Tensor> {
        let y = self.apply(x)?;
        if train {
            self.cache = Some(x.clone());
        }
        Ok(y)
    }

    fn apply(&self, x: &Tensor) -> Result<Tensor> {
        if x.sample_size() != self.inputs {
            return Err(shape_error("dense", self.inputs, x.sample_size()));
        }
        let mut y = Tensor::zeros(x.batch, self.outputs, 1);
        for b in 0..x.batch {
            let xs = x.sample(b);
            let ys = y.sample_mut(b);
            for (o, yo) in ys.iter_mut().enumerate() {
                let row = &self.weight.value[o * self.inputs..(o + 1) * self.inputs];
                *yo = self.bias.value[o] + row.iter().zip(xs).map(|(w, v)| w * v).sum::<f64>();
            }
        }
        Ok(y)
    }

    fn backward(&mut self, g: &Tensor) -> Result<Tensor> {
        let x = self.cache.as_ref().ok_or_else(|| Error::Input("dense backward before forward".into()))?;
        let mut gx = Tensor::zeros(x.batch, x.channels, x.len);
        for b in 0..x.batch {
            let xs = x.sample(b);
            let gs = g.sample(b);
            let gxs = gx.sample_mut(b);
            for (o, &go) in gs.iter().enumerate() {
                self.bias.grad[o] += go;
                let row = o * self.inputs..(o + 1) * self.inputs;
                for ((gw, w), (xi, gxi)) in self.weight.grad[row.clone()]
                    .iter_mut()
                    .zip(&self.weight.value[row])
                    .zip(xs.iter().zip(gxs.iter_mut()))
                {
                    *gw += go * xi;
                    *gxi += go * w;
                }
            }
        }
        Ok(gx)
    }
}

/// 1-D convolution, stride 1, zero "same" padding, odd kernel. Weight layout
/// `(out, in, k)`. Evaluated as one matrix product per batch over unrolled
/// input windows.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub weight: Param,
    pub bias: Param,
    cache: Option<(DMatrix<f64>, usize, usize)>, // windows, batch, len
}

impl Conv1d {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        if kernel % 2 == 0 {
            return Err(Error::Config("convolution kernel must be odd".into()));
        }
        Ok(Self::from_params(
            in_channels,
            out_channels,
            kernel,
            Param::he(out_channels * in_channels * kernel, in_channels * kernel, rng),
            Param::new(vec![0.0; out_channels]),
        ))
    }

    pub fn from_params(in_channels: usize, out_channels: usize, kernel: usize, weight: Param, bias: Param) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel,
            weight,
            bias,
            cache: None,
        }
    }

    /// Column `b*len + t` holds input window `x[b, ci, t - k/2 + j]` at row
    /// `ci*k + j`, zero outside the sequence.
    fn windows(&self, x: &Tensor) -> DMatrix<f64> {
        let (k, len) = (self.kernel, x.len);
        let half = (k / 2) as isize;
        let rows = self.in_channels * k;
        let mut cols = DMatrix::zeros(rows, x.batch * len);
        let buf = cols.as_mut_slice();
        for b in 0..x.batch {
            let xs = x.sample(b);
            for t in 0..len {
                let col = &mut buf[(b * len + t) * rows..(b * len + t + 1) * rows];
                for ci in 0..self.in_channels {
                    for j in 0..k {
                        let s = t as isize + j as isize - half;
                        if s >= 0 && (s as usize) < len {
                            col[ci * k + j] = xs[ci * len + s as usize];
                        }
                    }
                }
            }
        }
        cols
    }

    fn weight_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.out_channels, self.in_channels * self.kernel, &self.weight.value)
    }

    fn compute(&self, x: &Tensor) -> Result<(Tensor, DMatrix<f64>)> {
        if x.channels != self.in_channels {
            return Err(shape_error("conv1d", self.in_channels, x.channels));
        }
        let cols = self.windows(x);
        let prod = self.weight_matrix() * &cols;
        let len = x.len;
        let mut y = Tensor::zeros(x.batch, self.out_channels, len);
        for b in 0..x.batch {
            let ys = y.sample_mut(b);
            for t in 0..len {
                let c = prod.column(b * len + t);
                for (co, v) in c.iter().enumerate() {
                    ys[co * len + t] = v + self.bias.value[co];
                }
            }
        }
        Ok((y, cols))
    }

    fn forward(&mut self, x: &Tensor, train: bool) -> Result<Tensor> {
        let (y, cols) = self.compute(x)?;
        if train {
            self.cache = Some((cols, x.batch, x.len));
        }
        Ok(y)
    }

    fn apply(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.compute(x)?.0)
    }

    fn backward(&mut self, g: &Tensor) -> Result<Tensor> {
        let (cols, batch, len) = self.cache.as_ref().ok_or_else(|| Error::Input("conv backward before forward".into()))?;
        let (batch, len) = (*batch, *len);
        let mut gm = DMatrix::zeros(self.out_channels, batch * len);
        for b in 0..batch {
            let gs = g.sample(b);
            for t in 0..len {
                for (co, v) in gm.column_mut(b * len + t).iter_mut().enumerate() {
                    *v = gs[co * len + t];
                }
            }
        }
        let gw = &gm * cols.transpose();
        let rows = self.in_channels * self.kernel;
        for co in 0..self.out_channels {
            self.bias.grad[co] += gm.row(co).sum();
            for r in 0..rows {
                self.weight.grad[co * rows + r] += gw[(co, r)];
            }
        }
        let gcols = self.weight_matrix().transpose() * gm;
        let (k, half) = (self.kernel, (self.kernel / 2) as isize);
        let mut gx = Tensor::zeros(batch, self.in_channels, len);
        for b in 0..batch {
            let gxs = gx.sample_mut(b);
            for t in 0..len {
                let c = gcols.column(b * len + t);
                for ci in 0..self.in_channels {
                    for j in 0..k {
                        let s = t as isize + j as isize - half;
                        if s >= 0 && (s as usize) < len {
                            gxs[ci * len + s as usize] += c[ci * k + j];
                        }
                    }
                }
            }
        }
        Ok(gx)
    }
}

/// Per-channel batch normalization over batch and length.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub channels: usize,
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
    cache: Option<(Tensor, Vec<f64>)>, // normalized input, inverse std
}

impl BatchNorm {
    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            gamma: Param::new(vec![1.0; channels]),
            beta: Param::new(vec![0.0; channels]),
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            momentum: 0.1,
            eps: 1e-5,
            cache: None,
        }
    }

    fn forward(&mut self, x: &Tensor, train: bool) -> Result<Tensor> {
        if !train {
            return self.eval(x);
        }
        if x.channels != self.channels {
            return Err(shape_error("batch-norm", self.channels, x.channels));
        }
        let (len, c) = (x.len, self.channels);
        let count = (x.batch * len) as f64;
        let mut y = x.clone();
        let mut xhat = x.clone();
        let mut inv = vec![0.0; c];
        for ch in 0..c {
            let (mean, var) = {
                let mut s = 0.0;
                for b in 0..x.batch {
                    s += x.sample(b)[ch * len..(ch + 1) * len].iter().sum::<f64>();
                }
                let mean = s / count;
                let mut v = 0.0;
                for b in 0..x.batch {
                    v += x.sample(b)[ch * len..(ch + 1) * len].iter().map(|t| (t - mean).powi(2)).sum::<f64>();
                }
                let var = v / count;
                let unbiased = if count > 1.0 { var * count / (count - 1.0) } else { var };
                self.running_mean[ch] = (1.0 - self.momentum) * self.running_mean[ch] + self.momentum * mean;
                self.running_var[ch] = (1.0 - self.momentum) * self.running_var[ch] + self.momentum * unbiased;
                (mean, var)
            };
            inv[ch] = 1.0 / (var + self.eps).sqrt();
            let (g, be) = (self.gamma.value[ch], self.beta.value[ch]);
            for b in 0..x.batch {
                let r = ch * len..(ch + 1) * len;
                let xs = &x.sample(b)[r.clone()];
                let hs = &mut xhat.sample_mut(b)[r.clone()];
                for (h, v) in hs.iter_mut().zip(xs) {
                    *h = (v - mean) * inv[ch];
                }
                let hs = hs.to_vec();
                for (o, h) in y.sample_mut(b)[r].iter_mut().zip(hs) {
                    *o = g * h + be;
                }
            }
        }
        self.cache = Some((xhat, inv));
        Ok(y)
    }

    fn eval(&self, x: &Tensor) -> Result<Tensor> {
        if x.channels != self.channels {
            return Err(shape_error("batch-norm", self.channels, x.channels));
        }
        let len = x.len;
        let mut y = x.clone();
        for b in 0..x.batch {
            for (ch, row) in y.sample_mut(b).chunks_mut(len).enumerate() {
                let inv = 1.0 / (self.running_var[ch] + self.eps).sqrt();
                let (m, g, be) = (self.running_mean[ch], self.gamma.value[ch], self.beta.value[ch]);
                row.iter_mut().for_each(|v| *v = g * (*v - m) * inv + be);
            }
        }
        Ok(y)
    }

    fn backward(&mut self, g: &Tensor) -> Result<Tensor> {
        let (xhat, inv) = self.cache.as_ref().ok_or_else(|| Error::Input("batch-norm backward before forward".into()))?;
        let len = g.len;
        let count = (g.batch * len) as f64;
        let mut gx = g.clone();
        for ch in 0..self.channels {
            let r = ch * len..(ch + 1) * len;
            let (mut sg, mut sgh) = (0.0, 0.0);
            for b in 0..g.batch {
                for (gv, h) in g.sample(b)[r.clone()].iter().zip(&xhat.sample(b)[r.clone()]) {
                    sg += gv;
                    sgh += gv * h;
                }
            }
            self.beta.grad[ch] += sg;
            self.gamma.grad[ch] += sgh;
            let scale = self.gamma.value[ch] * inv[ch] / count;
            for b in 0..g.batch {
                let hs = xhat.sample(b)[r.clone()].to_vec();
                let gs = g.sample(b)[r.clone()].to_vec();
                for ((o, gv), h) in gx.sample_mut(b)[r.clone()].iter_mut().zip(gs).zip(hs) {
                    *o = scale * (count * gv - sg - h * sgh);
                }
            }
        }
        Ok(gx)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Relu {
    mask: Vec<bool>,
}

impl Relu {
    fn forward(&mut self, x: &Tensor, train: bool) -> Tensor {
        let mut y = x.clone();
        y.data.iter_mut().for_each(|v| *v = v.max(0.0));
        if train {
            self.mask = x.data.iter().map(|&v| v > 0.0).collect();
        }
        y
    }

    fn backward(&mut self, g: &Tensor) -> Tensor {
        let mut out = g.clone();
        for (o, &m) in out.data.iter_mut().zip(&self.mask) {
            if !m {
                *o = 0.0;
            }
        }
        out
    }
}

/// Inverted dropout: in training, zeroes each activation with probability
/// `rate` and scales survivors by `1/(1-rate)`; identity at inference.
#[derive(Debug, Clone, PartialEq)]
pub struct Dropout {
    pub rate: f64,
    rng: ChaCha8Rng,
    mask: Vec<f64>,
}

impl Dropout {
    pub fn new(rate: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config("dropout rate must lie in [0, 1)".into()));
        }
        Ok(Self {
            rate,
            rng: ChaCha8Rng::seed_from_u64(seed),
            mask: Vec::new(),
        })
    }

    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    fn forward(&mut self, x: &Tensor, train: bool) -> Tensor {
        if !train || self.rate == 0.0 {
            self.mask = vec![1.0; x.data.len()];
            return x.clone();
        }
        let keep = 1.0 / (1.0 - self.rate);
        let rate = self.rate;
        let rng = &mut self.rng;
        self.mask = (0..x.data.len())
            .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
            .collect();
        let mut y = x.clone();
        for (v, m) in y.data.iter_mut().zip(&self.mask) {
            *v *= m;
        }
        y
    }

    fn backward(&mut self, g: &Tensor) -> Tensor {
        let mut out = g.clone();
        for (v, m) in out.data.iter_mut().zip(&self.mask) {
            *v *= m;
        }
        out
    }
}

/// Non-overlapping max pooling; a trailing element that does not fill a
/// window is dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxPool {
    pub size: usize,
    argmax: Vec<usize>,
    input_shape: (usize, usize, usize),
}

impl MaxPool {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::Config("pool size must be positive".into()));
        }
        Ok(Self {
            size,
            argmax: Vec::new(),
            input_shape: (0, 0, 0),
        })
    }

    fn forward(&mut self, x: &Tensor, train: bool) -> Result<Tensor> {
        let (y, arg) = self.pool(x)?;
        if train {
            self.argmax = arg;
            self.input_shape = (x.batch, x.channels, x.len);
        }
        Ok(y)
    }

    fn pool(&self, x: &Tensor) -> Result<(Tensor, Vec<usize>)> {
        let out_len = x.len / self.size;
        if out_len == 0 {
            return Err(Error::Input("sequence shorter than pooling window".into()));
        }
        let mut y = Tensor::zeros(x.batch, x.channels, out_len);
        let mut arg = Vec::with_capacity(y.data.len());
        for row in 0..x.batch * x.channels {
            for o in 0..out_len {
                let base = row * x.len + o * self.size;
                let mut best = base;
                for i in base + 1..base + self.size {
                    if x.data[i] > x.data[best] {
                        best = i;
                    }
                }
                y.data[row * out_len + o] = x.data[best];
                arg.push(best);
            }
        }
        Ok((y, arg))
    }

    fn backward(&mut self, g: &Tensor) -> Tensor {
        let (b, c, l) = self.input_shape;
        let mut gx = Tensor::zeros(b, c, l);
        for (gv, &i) in g.data.iter().zip(&self.argmax) {
            gx.data[i] += gv;
        }
        gx
    }
}

/// Mean over the length axis: `(B, C, L) -> (B, C, 1)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GlobalAvgPool {
    len: usize,
}

impl GlobalAvgPool {
    fn forward(&mut self, x: &Tensor, train: bool) -> Tensor {
        if train {
            self.len = x.len;
        }
        Self::mean(x)
    }

    fn mean(x: &Tensor) -> Tensor {
        let mut y = Tensor::zeros(x.batch, x.channels, 1);
        for (o, chunk) in y.data.iter_mut().zip(x.data.chunks(x.len)) {
            *o = chunk.iter().sum::<f64>() / x.len as f64;
        }
        y
    }

    fn backward(&mut self, g: &Tensor) -> Tensor {
        let l = self.len;
        let mut gx = Tensor::zeros(g.batch, g.channels, l);
        for (chunk, gv) in gx.data.chunks_mut(l).zip(&g.data) {
            chunk.iter_mut().for_each(|v| *v = gv / l as f64);
        }
        gx
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Standardize(Standardize),
    Dense(Dense),
    Conv1d(Conv1d),
    BatchNorm(BatchNorm),
    Relu(Relu),
    Dropout(Dropout),
    MaxPool(MaxPool),
    GlobalAvgPool(GlobalAvgPool),
}

impl Layer {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::Standardize(_) => "standardize",
            Layer::Dense(_) => "dense",
            Layer::Conv1d(_) => "conv1d",
            Layer::BatchNorm(_) => "batch-norm",
            Layer::Relu(_) => "relu",
            Layer::Dropout(_) => "dropout",
            Layer::MaxPool(_) => "max-pool",
            Layer::GlobalAvgPool(_) => "global-avg-pool",
        }
    }

    pub fn forward(&mut self, x: &Tensor, train: bool) -> Result<Tensor> {
        match self {
            Layer::Standardize(l) => l.forward(x),
            Layer::Dense(l) => l.forward(x, train),
            Layer::Conv1d(l) => l.forward(x, train),
            Layer::BatchNorm(l) => l.forward(x, train),
            Layer::Relu(l) => Ok(l.forward(x, train)),
            Layer::Dropout(l) => Ok(l.forward(x, train)),
            Layer::MaxPool(l) => l.forward(x, train),
            Layer::GlobalAvgPool(l) => Ok(l.forward(x, train)),
        }
    }

    /// Inference-mode forward pass; leaves the layer untouched.
    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            Layer::Standardize(l) => l.forward(x),
            Layer::Dense(l) => l.apply(x),
            Layer::Conv1d(l) => l.apply(x),
            Layer::BatchNorm(l) => l.eval(x),
            Layer::Relu(_) => {
                let mut y = x.clone();
                y.data.iter_mut().for_each(|v| *v = v.max(0.0));
                Ok(y)
            }
            Layer::Dropout(_) => Ok(x.clone()),
            Layer::MaxPool(l) => Ok(l.pool(x)?.0),
            Layer::GlobalAvgPool(_) => Ok(GlobalAvgPool::mean(x)),
        }
    }

    /// Requires a preceding `forward` with `train = true`.
    pub fn backward(&mut self, g: &Tensor) -> Result<Tensor> {
        match self {
            Layer::Standardize(l) => Ok(l.backward(g)),
            Layer::Dense(l) => l.backward(g),
            Layer::Conv1d(l) => l.backward(g),
            Layer::BatchNorm(l) => l.backward(g),
            Layer::Relu(l) => Ok(l.backward(g)),
            Layer::Dropout(l) => Ok(l.backward(g)),
            Layer::MaxPool(l) => Ok(l.backward(g)),
            Layer::GlobalAvgPool(l) => Ok(l.backward(g)),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            Layer::Dense(l) => vec![&mut l.weight, &mut l.bias],
            Layer::Conv1d(l) => vec![&mut l.weight, &mut l.bias],
            Layer::BatchNorm(l) => vec![&mut l.gamma, &mut l.beta],
            _ => Vec::new(),
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        match self {
            Layer::Dense(l) => vec![&l.weight, &l.bias],
            Layer::Conv1d(l) => vec![&l.weight, &l.bias],
            Layer::BatchNorm(l) => vec![&l.gamma, &l.beta],
            _ => Vec::new(),
        }
    }
}

/// Numerically stable softmax of each sample's logits.
pub fn softmax(logits: &Tensor) -> Tensor {
    let mut p = logits.clone();
    for b in 0..logits.batch {
        let s = p.sample_mut(b);
        let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in s.iter_mut() {
            *v = (*v - m).exp();
            z += *v;
        }
        s.iter_mut().for_each(|v| *v /= z);
    }
    p
}

/// Mean cross-entropy `-ln p[label]` over the batch and its gradient with
/// respect to the logits.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    if labels.len() != logits.batch {
        return Err(Error::Input("one label per sample is required".into()));
    }
    let classes = logits.sample_size();
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Input(format!("label {bad} out of range for {classes} classes")));
    }
    let mut grad = softmax(logits);
    let n = logits.batch as f64;
    let mut loss = 0.0;
    for (b, &l) in labels.iter().enumerate() {
        let s = grad.sample_mut(b);
        // NaN must survive so diverged training is detected
        loss -= if s[l].is_nan() { f64::NAN } else { s[l].max(f64::MIN_POSITIVE).ln() };
        s[l] -= 1.0;
        s.iter_mut().for_each(|v| *v /= n);
    }
    Ok((loss / n, grad))
}
