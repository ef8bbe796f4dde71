//! Layer kernels. Every layer works on a whole [`TensorBatch`] so batch
//! normalization can see the batch; backward passes take the layer input
//! and whatever the forward pass cached.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{gemm, Dims, Tensor3, TensorBatch};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    None,
}

/// Logistic function, kept strictly inside `(0, 1)` even where `f64`
/// would round to an endpoint.
pub fn sigmoid(x: f64) -> f64 {
    let s = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

pub const BCE_CLAMP: f64 = 1e-7;

/// `-[y ln p + (1 - y) ln(1 - p)]` with `p` clamped to `[1e-7, 1 - 1e-7]`.
pub fn binary_cross_entropy(pred: f64, label: f64) -> f64 {
    let p = pred.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
    -(label * p.ln() + (1.0 - label) * (1.0 - p).ln())
}

fn glorot(rng: &mut impl Rng, fan_in: usize, fan_out: usize, len: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..len).map(|_| rng.gen_range(-limit..=limit)).collect()
}

/// Valid cross-correlation with `s` kernels of size `m x n x d`. Kernel
/// element `(i, j, c, f)` is stored at `((i * n + j) * d + c) * s + f`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub m: usize,
    pub n: usize,
    pub d: usize,
    pub s: usize,
    pub kernels: Vec<f64>,
    pub biases: Vec<f64>,
}

impl ConvLayer {
    pub fn new(m: usize, n: usize, d: usize, s: usize, kernels: Vec<f64>, biases: Vec<f64>) -> Result<Self> {
        if m == 0 || n == 0 || d == 0 || s == 0 {
            return Err(Error::Shape(format!("kernel {m}x{n}x{d}x{s} has a zero extent")));
        }
        if kernels.len() != m * n * d * s || biases.len() != s {
            return Err(Error::Shape(format!(
                "kernel {m}x{n}x{d}x{s} needs {} weights and {s} biases, got {} and {}",
                m * n * d * s,
                kernels.len(),
                biases.len()
            )));
        }
        Ok(Self {
            m,
            n,
            d,
            s,
            kernels,
            biases,
        })
    }

    pub fn glorot(m: usize, n: usize, d: usize, s: usize, rng: &mut impl Rng) -> Self {
        let kernels = glorot(rng, m * n * d, m * n * s, m * n * d * s);
        Self {
            m,
            n,
            d,
            s,
            kernels,
            biases: vec![0.0; s],
        }
    }

    pub(crate) fn output_dims(&self, input: Dims) -> Result<Dims> {
        if input.d != self.d {
            return Err(Error::Wiring(format!(
                "convolution expects depth {}, input has depth {}",
                self.d, input.d
            )));
        }
        if input.h < self.m || input.w < self.n {
            return Err(Error::Shape(format!(
                "{}x{} kernel does not fit a {input} input",
                self.m, self.n
            )));
        }
        Ok(Dims::new(input.h - self.m + 1, input.w - self.n + 1, self.s))
    }

    fn patch_len(&self) -> usize {
        self.m * self.n * self.d
    }

    /// Unrolls every receptive field of one sample into a row of `col`.
    fn im2col(&self, x: &[f64], dims: Dims, out: Dims, col: &mut [f64]) {
        let row_len = self.n * self.d;
        let k = self.patch_len();
        for oi in 0..out.h {
            for oj in 0..out.w {
                let dst = &mut col[(oi * out.w + oj) * k..][..k];
                for i in 0..self.m {
                    let src = ((oi + i) * dims.w + oj) * dims.d;
                    dst[i * row_len..(i + 1) * row_len].copy_from_slice(&x[src..src + row_len]);
                }
            }
        }
    }

    fn col2im_add(&self, col: &[f64], dims: Dims, out: Dims, dx: &mut [f64]) {
        let row_len = self.n * self.d;
        let k = self.patch_len();
        for oi in 0..out.h {
            for oj in 0..out.w {
                let src = &col[(oi * out.w + oj) * k..][..k];
                for i in 0..self.m {
                    let dst = ((oi + i) * dims.w + oj) * dims.d;
                    for (a, b) in dx[dst..dst + row_len]
                        .iter_mut()
                        .zip(&src[i * row_len..(i + 1) * row_len])
                    {
                        *a += b;
                    }
                }
            }
        }
    }

    pub(crate) fn forward(&self, x: &TensorBatch) -> Result<TensorBatch> {
        let out = self.output_dims(x.dims)?;
        let rows = out.h * out.w;
        let mut col = vec![0.0; rows * self.patch_len()];
        let mut y = vec![0.0; x.n * out.len()];
        for (k, ys) in y.chunks_exact_mut(out.len()).enumerate() {
            self.im2col(x.sample(k), x.dims, out, &mut col);
            for r in ys.chunks_exact_mut(self.s) {
                r.copy_from_slice(&self.biases);
            }
            gemm(
                rows,
                self.patch_len(),
                self.s,
                &col,
                false,
                &self.kernels,
                false,
                1.0,
                ys,
            );
        }
        Ok(TensorBatch::from_raw(x.n, out, y))
    }

    /// Returns kernel and bias gradients, plus the input gradient if asked.
    pub(crate) fn backward(&self, x: &TensorBatch, dy: &TensorBatch, need_dx: bool) -> ConvGrad {
        let out = dy.dims;
        let rows = out.h * out.w;
        let k = self.patch_len();
        let mut col = vec![0.0; rows * k];
        let mut dcol = if need_dx { vec![0.0; rows * k] } else { Vec::new() };
        let mut dk = vec![0.0; self.kernels.len()];
        let mut db = vec![0.0; self.s];
        let mut dx = if need_dx { vec![0.0; x.data.len()] } else { Vec::new() };
        for n in 0..x.n {
            let dys = dy.sample(n);
            self.im2col(x.sample(n), x.dims, out, &mut col);
            gemm(k, rows, self.s, &col, true, dys, false, 1.0, &mut dk);
            for r in dys.chunks_exact(self.s) {
                for (b, g) in db.iter_mut().zip(r) {
                    *b += g;
                }
            }
            if need_dx {
                gemm(rows, self.s, k, dys, false, &self.kernels, true, 0.0, &mut dcol);
                let len = x.dims.len();
                self.col2im_add(&dcol, x.dims, out, &mut dx[n * len..(n + 1) * len]);
            }
        }
        ConvGrad {
            kernels: dk,
            biases: db,
            input: need_dx.then_some(dx),
        }
    }
}

pub(crate) struct ConvGrad {
    pub kernels: Vec<f64>,
    pub biases: Vec<f64>,
    pub input: Option<Vec<f64>>,
}

/// Per-channel batch normalization. Training normalizes with the biased
/// batch variance; the running variance tracks the unbiased estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormLayer {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub epsilon: f64,
    pub momentum: f64,
}

pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

/// Batch statistics from a training-mode pass.
#[derive(Debug, Clone, PartialEq)]
pub struct BnStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub count: usize,
}

impl BatchNormLayer {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            epsilon: BN_EPSILON,
            momentum: BN_MOMENTUM,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let c = self.gamma.len();
        if self.beta.len() != c || self.running_mean.len() != c || self.running_var.len() != c {
            return Err(Error::Shape("batch-norm vectors differ in length".into()));
        }
        if self.running_var.iter().any(|v| *v < 0.0) || !(self.epsilon > 0.0) {
            return Err(Error::InvalidInput("batch-norm variance must be non-negative".into()));
        }
        Ok(())
    }

    fn check(&self, dims: Dims) -> Result<()> {
        if dims.d != self.channels() {
            return Err(Error::Wiring(format!(
                "batch norm has {} channels, input has depth {}",
                self.channels(),
                dims.d
            )));
        }
        Ok(())
    }

    pub(crate) fn batch_stats(&self, x: &TensorBatch) -> Result<BnStats> {
        self.check(x.dims)?;
        let c = self.channels();
        let count = x.n * x.dims.h * x.dims.w;
        if count == 0 {
            return Err(Error::InvalidInput(
                "batch norm needs a non-empty batch in train mode".into(),
            ));
        }
        let mut mean = vec![0.0; c];
        for px in x.data.chunks_exact(c) {
            for (m, v) in mean.iter_mut().zip(px) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= count as f64);
        let mut var = vec![0.0; c];
        for px in x.data.chunks_exact(c) {
            for ((s, v), m) in var.iter_mut().zip(px).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        var.iter_mut().for_each(|s| *s /= count as f64);
        Ok(BnStats { mean, var, count })
    }

    /// Normalizes with `stats` (train) or the running statistics (infer).
    pub(crate) fn forward(&self, x: &TensorBatch, stats: Option<&BnStats>) -> Result<TensorBatch> {
        self.check(x.dims)?;
        let (mean, var) = match stats {
            Some(s) => (&s.mean, &s.var),
            None => (&self.running_mean, &self.running_var),
        };
        let scale: Vec<f64> = var
            .iter()
            .zip(&self.gamma)
            .map(|(v, g)| g / (v + self.epsilon).sqrt())
            .collect();
        let c = self.channels();
        let mut y = x.data.clone();
        for px in y.chunks_exact_mut(c) {
            for ch in 0..c {
                px[ch] = (px[ch] - mean[ch]) * scale[ch] + self.beta[ch];
            }
        }
        Ok(TensorBatch::from_raw(x.n, x.dims, y))
    }

    pub(crate) fn update_running(&mut self, stats: &BnStats) {
        let unbias = if stats.count > 1 {
            stats.count as f64 / (stats.count - 1) as f64
        } else {
            1.0
        };
        for ch in 0..self.channels() {
            self.running_mean[ch] = self.momentum * self.running_mean[ch] + (1.0 - self.momentum) * stats.mean[ch];
            self.running_var[ch] =
                self.momentum * self.running_var[ch] + (1.0 - self.momentum) * stats.var[ch] * unbias;
        }
    }

    /// Gradients of a training-mode pass: `(dgamma, dbeta, dx)`.
    pub(crate) fn backward(
        &self,
        x: &TensorBatch,
        stats: &BnStats,
        dy: &TensorBatch,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let c = self.channels();
        let inv_std: Vec<f64> = stats.var.iter().map(|v| 1.0 / (v + self.epsilon).sqrt()).collect();
        let mut dgamma = vec![0.0; c];
        let mut dbeta = vec![0.0; c];
        for (px, g) in x.data.chunks_exact(c).zip(dy.data.chunks_exact(c)) {
            for ch in 0..c {
                let xhat = (px[ch] - stats.mean[ch]) * inv_std[ch];
                dgamma[ch] += g[ch] * xhat;
                dbeta[ch] += g[ch];
            }
        }
        // dx = gamma inv_std / M (M dy - sum dy - xhat sum(dy xhat))
        let m = stats.count as f64;
        let mut dx = vec![0.0; x.data.len()];
        for ((out, px), g) in dx
            .chunks_exact_mut(c)
            .zip(x.data.chunks_exact(c))
            .zip(dy.data.chunks_exact(c))
        {
            for ch in 0..c {
                let xhat = (px[ch] - stats.mean[ch]) * inv_std[ch];
                out[ch] = self.gamma[ch] * inv_std[ch] / m * (m * g[ch] - dbeta[ch] - xhat * dgamma[ch]);
            }
        }
        (dgamma, dbeta, dx)
    }
}

/// Fully connected layer; `weights` is `inputs x outputs`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    pub fn new(inputs: usize, outputs: usize, weights: Vec<f64>, biases: Vec<f64>) -> Result<Self> {
        if inputs == 0 || outputs == 0 || weights.len() != inputs * outputs || biases.len() != outputs {
            return Err(Error::Shape(format!(
                "dense {inputs} -> {outputs} got {} weights and {} biases",
                weights.len(),
                biases.len()
            )));
        }
        if weights.iter().chain(&biases).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("dense parameters must be finite".into()));
        }
        Ok(Self {
            inputs,
            outputs,
            weights,
            biases,
        })
    }

    pub fn glorot(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let weights = glorot(rng, inputs, outputs, inputs * outputs);
        Self {
            inputs,
            outputs,
            weights,
            biases: vec![0.0; outputs],
        }
    }

    fn check(&self, dims: Dims) -> Result<()> {
        if dims.len() != self.inputs {
            return Err(Error::Wiring(format!(
                "dense layer expects {} inputs, got {}",
                self.inputs,
                dims.len()
            )));
        }
        Ok(())
    }

    pub(crate) fn forward(&self, x: &TensorBatch) -> Result<TensorBatch> {
        self.check(x.dims)?;
        let mut y = Vec::with_capacity(x.n * self.outputs);
        for _ in 0..x.n {
            y.extend_from_slice(&self.biases);
        }
        gemm(
            x.n,
            self.inputs,
            self.outputs,
            &x.data,
            false,
            &self.weights,
            false,
            1.0,
            &mut y,
        );
        Ok(TensorBatch::from_raw(x.n, Dims::flat(self.outputs), y))
    }

    /// `(dW, db, dx)`.
    pub(crate) fn backward(&self, x: &TensorBatch, dy: &TensorBatch) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut dw = vec![0.0; self.weights.len()];
        gemm(
            self.inputs,
            x.n,
            self.outputs,
            &x.data,
            true,
            &dy.data,
            false,
            0.0,
            &mut dw,
        );
        let mut db = vec![0.0; self.outputs];
        for r in dy.data.chunks_exact(self.outputs) {
            for (b, g) in db.iter_mut().zip(r) {
                *b += g;
            }
        }
        let mut dx = vec![0.0; x.data.len()];
        gemm(
            x.n,
            self.outputs,
            self.inputs,
            &dy.data,
            false,
            &self.weights,
            true,
            0.0,
            &mut dx,
        );
        (dw, db, dx)
    }
}

pub(crate) fn pool_output_dims(input: Dims, m: usize, n: usize) -> Result<Dims> {
    if m == 0 || n == 0 || input.h % m != 0 || input.w % n != 0 {
        return Err(Error::Shape(format!("{m}x{n} pooling does not tile a {input} input")));
    }
    Ok(Dims::new(input.h / m, input.w / n, input.d))
}

/// Non-overlapping max pooling; also returns the within-sample index of
/// each winner (first maximum in scan order).
pub(crate) fn pool_forward(x: &TensorBatch, m: usize, n: usize) -> Result<(TensorBatch, Vec<u32>)> {
    let out = pool_output_dims(x.dims, m, n)?;
    let (w, d) = (x.dims.w, x.dims.d);
    let mut y = vec![f64::NEG_INFINITY; x.n * out.len()];
    let mut arg = vec![0u32; x.n * out.len()];
    for k in 0..x.n {
        let xs = x.sample(k);
        let ys = &mut y[k * out.len()..(k + 1) * out.len()];
        let args = &mut arg[k * out.len()..(k + 1) * out.len()];
        for i in 0..x.dims.h {
            let oi = i / m;
            for j in 0..w {
                let oj = j / n;
                let src = (i * w + j) * d;
                let dst = (oi * out.w + oj) * d;
                for c in 0..d {
                    if xs[src + c] > ys[dst + c] {
                        ys[dst + c] = xs[src + c];
                        args[dst + c] = (src + c) as u32;
                    }
                }
            }
        }
    }
    Ok((TensorBatch::from_raw(x.n, out, y), arg))
}

pub(crate) fn pool_backward(input: Dims, n: usize, arg: &[u32], dy: &TensorBatch) -> Vec<f64> {
    let mut dx = vec![0.0; n * input.len()];
    let out_len = dy.dims.len();
    for k in 0..n {
        for o in 0..out_len {
            dx[k * input.len() + arg[k * out_len + o] as usize] += dy.data[k * out_len + o];
        }
    }
    dx
}

/// Inverted-dropout mask: zero with probability `rate`, else `1 / (1 - rate)`.
pub(crate) fn dropout_mask(len: usize, rate: f64, seed: u64, stream: u64) -> Vec<f64> {
    if rate == 0.0 {
        return vec![1.0; len];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

pub(crate) fn check_dropout_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidConfig(format!(
            "dropout rate must lie in [0, 1), got {rate}"
        )));
    }
    Ok(())
}

/// Single-sample valid convolution.
pub fn conv2d(input: &Tensor3, layer: &ConvLayer) -> Result<Tensor3> {
    let out = layer.forward(&TensorBatch::from_samples(std::slice::from_ref(input))?)?;
    Ok(out.to_samples().remove(0))
}

/// Batch normalization over `(batch, H, W)` per channel. Train mode also
/// folds the batch statistics into the running statistics.
pub fn batch_norm(inputs: &[Tensor3], layer: &mut BatchNormLayer, mode: Mode) -> Result<Vec<Tensor3>> {
    if inputs.is_empty() {
        return match mode {
            Mode::Train => Err(Error::InvalidInput(
                "batch norm needs a non-empty batch in train mode".into(),
            )),
            Mode::Infer => Ok(Vec::new()),
        };
    }
    let x = TensorBatch::from_samples(inputs)?;
    let y = match mode {
        Mode::Train => {
            let stats = layer.batch_stats(&x)?;
            let y = layer.forward(&x, Some(&stats))?;
            layer.update_running(&stats);
            y
        }
        Mode::Infer => layer.forward(&x, None)?,
    };
    Ok(y.to_samples())
}

pub fn max_pool(input: &Tensor3, m: usize, n: usize) -> Result<Tensor3> {
    let (y, _) = pool_forward(&TensorBatch::from_samples(std::slice::from_ref(input))?, m, n)?;
    Ok(y.to_samples().remove(0))
}

pub fn dense(x: &[f64], layer: &DenseLayer, activation: Activation) -> Result<Vec<f64>> {
    let batch = TensorBatch::from_raw(1, Dims::flat(x.len()), x.to_vec());
    let mut y = layer.forward(&batch)?.data;
    match activation {
        Activation::Relu => y.iter_mut().for_each(|v| *v = v.max(0.0)),
        Activation::Sigmoid => y.iter_mut().for_each(|v| *v = sigmoid(*v)),
        Activation::None => {}
    }
    Ok(y)
}

pub fn dropout(x: &[f64], rate: f64, mode: Mode, seed: u64) -> Result<Vec<f64>> {
    check_dropout_rate(rate)?;
    Ok(match mode {
        Mode::Infer => x.to_vec(),
        Mode::Train => x
            .iter()
            .zip(dropout_mask(x.len(), rate, seed, 0))
            .map(|(v, k)| v * k)
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(h: usize, w: usize, d: usize, v: Vec<f64>) -> Tensor3 {
        Tensor3::new(Dims::new(h, w, d), v).unwrap()
    }

    #[test]
    fn conv_examples() {
        let ones = ConvLayer::new(2, 2, 1, 1, vec![1.0; 4], vec![0.0]).unwrap();
        assert_eq!(conv2d(&t(2, 2, 1, vec![1.0; 4]), &ones).unwrap().data(), &[4.0]);

        let x = t(3, 3, 1, (1..=9).map(f64::from).collect());
        let diag = ConvLayer::new(2, 2, 1, 1, vec![1.0, 0.0, 0.0, -1.0], vec![0.0]).unwrap();
        assert_eq!(conv2d(&x, &diag).unwrap().data(), &[-4.0; 4]);

        let pick = ConvLayer::new(2, 2, 1, 1, vec![1.0, 0.0, 0.0, 0.0], vec![0.0]).unwrap();
        assert_eq!(conv2d(&x, &pick).unwrap().data(), &[1.0, 2.0, 4.0, 5.0]);
    }

    #[test]
    fn conv_wiring_errors() {
        let layer = ConvLayer::new(2, 2, 2, 1, vec![1.0; 8], vec![0.0]).unwrap();
        assert!(matches!(
            conv2d(&t(3, 3, 1, vec![0.0; 9]), &layer),
            Err(Error::Wiring(_))
        ));
        let big = ConvLayer::new(4, 4, 1, 1, vec![1.0; 16], vec![0.0]).unwrap();
        assert!(conv2d(&t(3, 3, 1, vec![0.0; 9]), &big).is_err());
    }

    #[test]
    fn multi_channel_conv_by_hand() {
        // 2x2x2 input, 1x1 kernels mixing channels into 2 outputs
        let x = t(2, 2, 2, vec![1.0, 10.0, 2.0, 20.0, 3.0, 30.0, 4.0, 40.0]);
        let layer = ConvLayer::new(1, 1, 2, 2, vec![1.0, 0.5, 1.0, -0.1], vec![0.0, 1.0]).unwrap();
        let y = conv2d(&x, &layer).unwrap();
        assert_eq!(y.dims(), Dims::new(2, 2, 2));
        assert_eq!(y.get(1, 0, 0), 33.0);
        assert!((y.get(1, 0, 1) - (1.5 - 3.0 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn batch_norm_examples() {
        let mut bn = BatchNormLayer::new(1);
        let out = batch_norm(&[t(1, 1, 1, vec![1.0]), t(1, 1, 1, vec![3.0])], &mut bn, Mode::Train).unwrap();
        let s = 1.0 / (1.0 + 1e-5f64).sqrt();
        assert!((out[0].data()[0] + s).abs() < 1e-15);
        assert!((out[1].data()[0] - s).abs() < 1e-15);
        assert!((bn.running_mean[0] - 0.2).abs() < 1e-15);
        // unbiased batch variance 2
        assert!((bn.running_var[0] - (0.9 + 0.1 * 2.0)).abs() < 1e-15);

        let mut flat = BatchNormLayer::new(1);
        let out = batch_norm(&[t(2, 2, 1, vec![5.0; 4])], &mut flat, Mode::Train).unwrap();
        assert!(out[0].data().iter().all(|v| *v == 0.0));

        let mut zero_gamma = BatchNormLayer::new(2);
        zero_gamma.gamma = vec![0.0; 2];
        zero_gamma.beta = vec![0.5, -2.0];
        let x = t(1, 2, 2, vec![1.0, 7.0, -3.0, 2.0]);
        for mode in [Mode::Train, Mode::Infer] {
            let out = batch_norm(std::slice::from_ref(&x), &mut zero_gamma, mode).unwrap();
            assert_eq!(out[0].data(), &[0.5, -2.0, 0.5, -2.0]);
        }
        assert!(batch_norm(&[], &mut bn, Mode::Train).is_err());
    }

    #[test]
    fn pool_examples() {
        assert_eq!(
            max_pool(&t(2, 2, 1, vec![1.0, 2.0, 3.0, 4.0]), 2, 2).unwrap().data(),
            &[4.0]
        );
        let c = max_pool(&t(4, 4, 2, vec![0.7; 32]), 2, 2).unwrap();
        assert_eq!(c.dims(), Dims::new(2, 2, 2));
        assert!(c.data().iter().all(|v| *v == 0.7));
        assert!(matches!(
            max_pool(&t(3, 4, 1, vec![0.0; 12]), 2, 2),
            Err(Error::Shape(_))
        ));
        assert_eq!(
            pool_output_dims(Dims::new(128, 128, 64), 16, 16).unwrap(),
            Dims::new(8, 8, 64)
        );
    }

    #[test]
    fn dense_examples() {
        let zero = DenseLayer::new(3, 1, vec![1.0, -2.0, 0.3], vec![0.0]).unwrap();
        assert_eq!(dense(&[0.0; 3], &zero, Activation::Sigmoid).unwrap(), vec![0.5]);
        let id = DenseLayer::new(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![0.0; 2]).unwrap();
        assert_eq!(dense(&[-1.0, 2.0], &id, Activation::Relu).unwrap(), vec![0.0, 2.0]);
        let affine = DenseLayer::new(1, 1, vec![2.0], vec![1.0]).unwrap();
        assert_eq!(dense(&[3.0], &affine, Activation::None).unwrap(), vec![7.0]);
        assert!(matches!(
            dense(&[1.0, 2.0], &affine, Activation::None),
            Err(Error::Wiring(_))
        ));
    }

    #[test]
    fn dropout_examples() {
        let x: Vec<f64> = (0..100).map(f64::from).collect();
        assert_eq!(dropout(&x, 0.0, Mode::Train, 1).unwrap(), x);
        assert_eq!(dropout(&x, 0.7, Mode::Infer, 1).unwrap(), x);
        let big = vec![1.0; 100_000];
        let y = dropout(&big, 0.3, Mode::Train, 42).unwrap();
        let zeros = y.iter().filter(|v| **v == 0.0).count() as f64 / 1e5;
        assert!((zeros - 0.3).abs() < 0.01, "zero share {zeros}");
        assert!(y.iter().all(|v| *v == 0.0 || (*v - 1.0 / 0.7).abs() < 1e-15));
        assert!(dropout(&x, 1.0, Mode::Train, 1).is_err());
    }

    #[test]
    fn bce_examples() {
        assert!((binary_cross_entropy(0.5, 1.0) - 2f64.ln()).abs() < 1e-15);
        assert!((binary_cross_entropy(0.5, 0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((binary_cross_entropy(0.9, 0.0) + 0.1f64.ln()).abs() < 1e-12);
        assert!((binary_cross_entropy(1.0, 1.0) + (1.0 - 1e-7f64).ln()).abs() < 1e-18);
    }

    #[test]
    fn sigmoid_stays_open() {
        for x in [-1e6, -800.0, -30.0, 0.0, 30.0, 40.0, 1e6] {
            let s = sigmoid(x);
            assert!(s > 0.0 && s < 1.0, "sigmoid({x}) = {s}");
        }
    }
}
