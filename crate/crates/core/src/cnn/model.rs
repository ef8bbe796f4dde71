use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{
    binary_cross_entropy, check_dropout_rate, dropout_mask, pool_backward, pool_forward, pool_output_dims, sigmoid,
    BatchNormLayer, BnStats, ConvLayer, DenseLayer,
};
use super::metrics::Metrics;
use super::tensor::{Dims, TensorBatch};
use super::train::TrainConfig;
use crate::error::{Error, Result};

/// Declarative layer description used to build a [`Model`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv { m: usize, n: usize, filters: usize },
    BatchNorm,
    Relu,
    MaxPool { m: usize, n: usize },
    Flatten,
    Dense { units: usize },
    Dropout { rate: f64 },
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv(ConvLayer),
    BatchNorm(BatchNormLayer),
    Relu,
    MaxPool { m: usize, n: usize },
    Flatten,
    Dense(DenseLayer),
    Dropout { rate: f64 },
    Sigmoid,
}

impl Layer {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::Conv(_) => "conv",
            Layer::BatchNorm(_) => "batch_norm",
            Layer::Relu => "relu",
            Layer::MaxPool { .. } => "max_pool",
            Layer::Flatten => "flatten",
            Layer::Dense(_) => "dense",
            Layer::Dropout { .. } => "dropout",
            Layer::Sigmoid => "sigmoid",
        }
    }

    pub(crate) fn output_dims(&self, input: Dims) -> Result<Dims> {
        match self {
            Layer::Conv(c) => c.output_dims(input),
            Layer::BatchNorm(bn) => {
                if bn.channels() != input.d {
                    return Err(Error::Wiring(format!(
                        "batch norm has {} channels, input has depth {}",
                        bn.channels(),
                        input.d
                    )));
                }
                Ok(input)
            }
            Layer::MaxPool { m, n } => pool_output_dims(input, *m, *n),
            Layer::Flatten => Ok(Dims::flat(input.len())),
            Layer::Dense(d) => {
                if !input.is_flat() || input.d != d.inputs {
                    return Err(Error::Wiring(format!(
                        "dense layer expects {} inputs, got {input}",
                        d.inputs
                    )));
                }
                Ok(Dims::flat(d.outputs))
            }
            Layer::Relu | Layer::Dropout { .. } | Layer::Sigmoid => Ok(input),
        }
    }

    /// Whether this layer starts a new row of the shape chain.
    fn reshapes(&self) -> bool {
        matches!(
            self,
            Layer::Conv(_) | Layer::MaxPool { .. } | Layer::Flatten | Layer::Dense(_)
        )
    }
}

/// Bookkeeping stored with a model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub seed: u64,
    pub epochs_trained: usize,
    pub config: Option<TrainConfig>,
    pub metrics: Option<Metrics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    input_dims: Dims,
    layers: Vec<Layer>,
    pub metadata: ModelMetadata,
}

pub const BEAT_INPUT: Dims = Dims::new(138, 138, 1);

/// Dims after the input, each convolution, the pooling, the flatten and each
/// dense layer of the reference network.
pub const TABLE2_SHAPE_CHAIN: [Dims; 8] = [
    Dims::new(138, 138, 1),
    Dims::new(132, 132, 32),
    Dims::new(128, 128, 64),
    Dims::new(8, 8, 64),
    Dims::flat(4096),
    Dims::flat(1024),
    Dims::flat(256),
    Dims::flat(1),
];

pub fn table2_specs() -> Vec<LayerSpec> {
    vec![
        LayerSpec::Conv {
            m: 7,
            n: 7,
            filters: 32,
        },
        LayerSpec::BatchNorm,
        LayerSpec::Relu,
        LayerSpec::Conv {
            m: 5,
            n: 5,
            filters: 64,
        },
        LayerSpec::BatchNorm,
        LayerSpec::Relu,
        LayerSpec::MaxPool { m: 16, n: 16 },
        LayerSpec::Flatten,
        LayerSpec::Dense { units: 1024 },
        LayerSpec::Relu,
        LayerSpec::Dropout { rate: 0.3 },
        LayerSpec::Dense { units: 256 },
        LayerSpec::Relu,
        LayerSpec::Dropout { rate: 0.2 },
        LayerSpec::Dense { units: 1 },
        LayerSpec::Sigmoid,
    ]
}

/// Same layer sequence as the reference network, scaled to a 12x12 input.
pub fn miniature_specs() -> Vec<LayerSpec> {
    vec![
        LayerSpec::Conv { m: 3, n: 3, filters: 3 },
        LayerSpec::BatchNorm,
        LayerSpec::Relu,
        LayerSpec::Conv { m: 3, n: 3, filters: 4 },
        LayerSpec::BatchNorm,
        LayerSpec::Relu,
        LayerSpec::MaxPool { m: 2, n: 2 },
        LayerSpec::Flatten,
        LayerSpec::Dense { units: 8 },
        LayerSpec::Relu,
        LayerSpec::Dropout { rate: 0.3 },
        LayerSpec::Dense { units: 5 },
        LayerSpec::Relu,
        LayerSpec::Dropout { rate: 0.2 },
        LayerSpec::Dense { units: 1 },
        LayerSpec::Sigmoid,
    ]
}

pub const MINIATURE_INPUT: Dims = Dims::new(12, 12, 1);

/// How a forward pass treats batch norm and dropout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pass {
    /// Batch statistics and dropout masks drawn from `dropout_seed`.
    Train { dropout_seed: u64 },
    /// Running statistics, no dropout.
    Infer,
}

/// Everything a backward pass needs from the forward pass.
pub struct ForwardCache {
    /// `inputs[l]` is the input of layer `l`.
    inputs: Vec<TensorBatch>,
    output: TensorBatch,
    bn_stats: Vec<Option<BnStats>>,
    pool_args: Vec<Option<Vec<u32>>>,
    masks: Vec<Option<Vec<f64>>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.output.data()
    }
}

/// Parameter gradients, one entry per layer.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerGrad {
    None,
    Conv { kernels: Vec<f64>, biases: Vec<f64> },
    BatchNorm { gamma: Vec<f64>, beta: Vec<f64> },
    Dense { weights: Vec<f64>, biases: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    /// Flat views in the same order as [`Model::parameters`].
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for g in &self.layers {
            match g {
                LayerGrad::None => {}
                LayerGrad::Conv { kernels, biases } => out.extend([kernels.as_slice(), biases.as_slice()]),
                LayerGrad::BatchNorm { gamma, beta } => out.extend([gamma.as_slice(), beta.as_slice()]),
                LayerGrad::Dense { weights, biases } => out.extend([weights.as_slice(), biases.as_slice()]),
            }
        }
        out
    }
}

impl Model {
    pub fn build(input_dims: Dims, specs: &[LayerSpec], seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dims = input_dims;
        if dims.is_empty() {
            return Err(Error::Shape("model input has a zero extent".into()));
        }
        let mut layers = Vec::with_capacity(specs.len());
        for spec in specs {
            let layer = match *spec {
                LayerSpec::Conv { m, n, filters } => {
                    if m == 0 || n == 0 || filters == 0 {
                        return Err(Error::Shape(format!("conv {m}x{n}x{filters} has a zero extent")));
                    }
                    Layer::Conv(ConvLayer::glorot(m, n, dims.d, filters, &mut rng))
                }
                LayerSpec::BatchNorm => Layer::BatchNorm(BatchNormLayer::new(dims.d)),
                LayerSpec::Relu => Layer::Relu,
                LayerSpec::MaxPool { m, n } => Layer::MaxPool { m, n },
                LayerSpec::Flatten => Layer::Flatten,
                LayerSpec::Dense { units } => {
                    if units == 0 {
                        return Err(Error::Shape("dense layer with zero units".into()));
                    }
                    Layer::Dense(DenseLayer::glorot(dims.len(), units, &mut rng))
                }
                LayerSpec::Dropout { rate } => {
                    check_dropout_rate(rate)?;
                    Layer::Dropout { rate }
                }
                LayerSpec::Sigmoid => Layer::Sigmoid,
            };
            dims = layer.output_dims(dims)?;
            layers.push(layer);
        }
        let model = Self {
            input_dims,
            layers,
            metadata: ModelMetadata {
                seed,
                ..Default::default()
            },
        };
        model.check_head()?;
        Ok(model)
    }

    /// Assembles a model from existing layers, checking the wiring.
    pub fn from_layers(input_dims: Dims, layers: Vec<Layer>, metadata: ModelMetadata) -> Result<Self> {
        let mut dims = input_dims;
        for layer in &layers {
            if let Layer::BatchNorm(bn) = layer {
                bn.validate()?;
            }
            if let Layer::Dropout { rate } = layer {
                check_dropout_rate(*rate)?;
            }
            dims = layer.output_dims(dims)?;
        }
        let model = Self {
            input_dims,
            layers,
            metadata,
        };
        model.check_head()?;
        Ok(model)
    }

    fn check_head(&self) -> Result<()> {
        if !matches!(self.layers.last(), Some(Layer::Sigmoid)) || self.output_dims() != Dims::flat(1) {
            return Err(Error::Wiring("the network must end in a single sigmoid unit".into()));
        }
        Ok(())
    }

    /// The reference beat classifier; errors if its shape chain drifts.
    pub fn table2(seed: u64) -> Result<Self> {
        let model = Self::build(BEAT_INPUT, &table2_specs(), seed)?;
        let chain = model.shape_chain();
        if chain != TABLE2_SHAPE_CHAIN {
            return Err(Error::Shape(format!(
                "shape chain {chain:?} differs from the reference"
            )));
        }
        Ok(model)
    }

    pub fn miniature(seed: u64) -> Result<Self> {
        Self::build(MINIATURE_INPUT, &miniature_specs(), seed)
    }

    pub fn input_dims(&self) -> Dims {
        self.input_dims
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    #[cfg(test)]
    pub(crate) fn layers_mut_for_test(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn output_dims(&self) -> Dims {
        self.layer_dims().last().copied().unwrap_or(self.input_dims)
    }

    /// Output dims of every layer.
    pub fn layer_dims(&self) -> Vec<Dims> {
        let mut dims = self.input_dims;
        self.layers
            .iter()
            .map(|l| {
                dims = l.output_dims(dims).expect("wiring checked at construction");
                dims
            })
            .collect()
    }

    /// Input dims followed by the output of every reshaping layer.
    pub fn shape_chain(&self) -> Vec<Dims> {
        let mut chain = vec![self.input_dims];
        for (layer, dims) in self.layers.iter().zip(self.layer_dims()) {
            if layer.reshapes() {
                chain.push(dims);
            }
        }
        chain
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|p| p.len()).sum()
    }

    /// Trainable tensors in a fixed order: per layer, weights then biases
    /// (or gamma then beta).
    pub fn parameters(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv(c) => out.extend([c.kernels.as_slice(), c.biases.as_slice()]),
                Layer::BatchNorm(b) => out.extend([b.gamma.as_slice(), b.beta.as_slice()]),
                Layer::Dense(d) => out.extend([d.weights.as_slice(), d.biases.as_slice()]),
                _ => {}
            }
        }
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(c) => out.extend([c.kernels.as_mut_slice(), c.biases.as_mut_slice()]),
                Layer::BatchNorm(b) => out.extend([b.gamma.as_mut_slice(), b.beta.as_mut_slice()]),
                Layer::Dense(d) => out.extend([d.weights.as_mut_slice(), d.biases.as_mut_slice()]),
                _ => {}
            }
        }
        out
    }

    fn check_input(&self, x: &TensorBatch) -> Result<()> {
        if x.dims() != self.input_dims {
            return Err(Error::Wiring(format!(
                "model expects {} inputs, got {}",
                self.input_dims,
                x.dims()
            )));
        }
        if x.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        Ok(())
    }

    fn apply(
        &self,
        l: usize,
        x: &TensorBatch,
        pass: Pass,
    ) -> Result<(TensorBatch, Option<BnStats>, Option<Vec<u32>>, Option<Vec<f64>>)> {
        let mut stats = None;
        let mut args = None;
        let mut mask = None;
        let y = match &self.layers[l] {
            Layer::Conv(c) => c.forward(x)?,
            Layer::BatchNorm(bn) => match pass {
                Pass::Train { .. } => {
                    let s = bn.batch_stats(x)?;
                    let y = bn.forward(x, Some(&s))?;
                    stats = Some(s);
                    y
                }
                Pass::Infer => bn.forward(x, None)?,
            },
            Layer::Relu => TensorBatch::from_raw(x.n, x.dims, x.data.iter().map(|v| v.max(0.0)).collect()),
            Layer::MaxPool { m, n } => {
                let (y, a) = pool_forward(x, *m, *n)?;
                args = Some(a);
                y
            }
            Layer::Flatten => TensorBatch::from_raw(x.n, Dims::flat(x.dims.len()), x.data.clone()),
            Layer::Dense(d) => d.forward(x)?,
            Layer::Dropout { rate } => match pass {
                Pass::Train { dropout_seed } => {
                    let k = dropout_mask(x.data.len(), *rate, dropout_seed, l as u64);
                    let y = x.data.iter().zip(&k).map(|(v, k)| v * k).collect();
                    mask = Some(k);
                    TensorBatch::from_raw(x.n, x.dims, y)
                }
                Pass::Infer => x.clone(),
            },
            Layer::Sigmoid => TensorBatch::from_raw(x.n, x.dims, x.data.iter().map(|v| sigmoid(*v)).collect()),
        };
        Ok((y, stats, args, mask))
    }

    /// Forward pass keeping every intermediate for [`Model::backward`].
    pub fn forward(&self, x: TensorBatch, pass: Pass) -> Result<ForwardCache> {
        self.check_input(&x)?;
        let n_layers = self.layers.len();
        let mut inputs = Vec::with_capacity(n_layers);
        let mut bn_stats = Vec::with_capacity(n_layers);
        let mut pool_args = Vec::with_capacity(n_layers);
        let mut masks = Vec::with_capacity(n_layers);
        let mut cur = x;
        for l in 0..n_layers {
            let (y, s, a, m) = self.apply(l, &cur, pass)?;
            inputs.push(cur);
            bn_stats.push(s);
            pool_args.push(a);
            masks.push(m);
            cur = y;
        }
        Ok(ForwardCache {
            inputs,
            output: cur,
            bn_stats,
            pool_args,
            masks,
        })
    }

    /// Sigmoid outputs without keeping intermediates.
    pub fn predict_batch(&self, x: TensorBatch, pass: Pass) -> Result<Vec<f64>> {
        self.check_input(&x)?;
        let mut cur = x;
        for l in 0..self.layers.len() {
            cur = self.apply(l, &cur, pass)?.0;
        }
        Ok(cur.data)
    }

    /// Mean binary cross-entropy of `probs` against `labels`.
    pub fn mean_loss(probs: &[f64], labels: &[f64]) -> f64 {
        probs
            .iter()
            .zip(labels)
            .map(|(p, y)| binary_cross_entropy(*p, *y))
            .sum::<f64>()
            / probs.len() as f64
    }

    /// Gradients of the mean batch cross-entropy. The sigmoid and the loss
    /// are differentiated together, giving `(p - y) / B` at the logit.
    pub fn backward(&self, cache: &ForwardCache, labels: &[f64]) -> Result<Gradients> {
        let b = cache.output.n;
        if labels.len() != b {
            return Err(Error::InvalidInput(format!(
                "{} labels for a batch of {b}",
                labels.len()
            )));
        }
        let last = self.layers.len() - 1;
        let dz: Vec<f64> = cache
            .output
            .data
            .iter()
            .zip(labels)
            .map(|(p, y)| (p - y) / b as f64)
            .collect();
        let mut grad = TensorBatch::from_raw(b, cache.output.dims, dz);
        let mut layers = vec![LayerGrad::None; self.layers.len()];
        for l in (0..last).rev() {
            let x = &cache.inputs[l];
            let need_dx = l > 0;
            let dx = match &self.layers[l] {
                Layer::Conv(c) => {
                    let g = c.backward(x, &grad, need_dx);
                    layers[l] = LayerGrad::Conv {
                        kernels: g.kernels,
                        biases: g.biases,
                    };
                    g.input
                }
                Layer::BatchNorm(bn) => {
                    let stats = cache.bn_stats[l]
                        .as_ref()
                        .ok_or_else(|| Error::InvalidInput("backward needs a training-mode forward pass".into()))?;
                    let (dgamma, dbeta, dx) = bn.backward(x, stats, &grad);
                    layers[l] = LayerGrad::BatchNorm {
                        gamma: dgamma,
                        beta: dbeta,
                    };
                    Some(dx)
                }
                Layer::Relu => Some(
                    grad.data
                        .iter()
                        .zip(&x.data)
                        .map(|(g, v)| if *v > 0.0 { *g } else { 0.0 })
                        .collect(),
                ),
                Layer::MaxPool { .. } => {
                    let args = cache.pool_args[l].as_ref().expect("pool arguments cached");
                    Some(pool_backward(x.dims, x.n, args, &grad))
                }
                Layer::Flatten => Some(std::mem::take(&mut grad.data)),
                Layer::Dense(d) => {
                    let (dw, db, dx) = d.backward(x, &grad);
                    layers[l] = LayerGrad::Dense {
                        weights: dw,
                        biases: db,
                    };
                    Some(dx)
                }
                Layer::Dropout { .. } => Some(match &cache.masks[l] {
                    Some(mask) => grad.data.iter().zip(mask).map(|(g, k)| g * k).collect(),
                    None => std::mem::take(&mut grad.data),
                }),
                Layer::Sigmoid => {
                    return Err(Error::Wiring("sigmoid is only supported as the output layer".into()));
                }
            };
            match dx {
                Some(dx) => grad = TensorBatch::from_raw(x.n, x.dims, dx),
                None => break,
            }
        }
        Ok(Gradients { layers })
    }

    /// Folds the batch statistics of a training pass into the running ones.
    pub fn update_running_stats(&mut self, cache: &ForwardCache) {
        for (layer, stats) in self.layers.iter_mut().zip(&cache.bn_stats) {
            if let (Layer::BatchNorm(bn), Some(s)) = (layer, stats) {
                bn.update_running(s);
            }
        }
    }

    /// Plain SGD step `theta <- theta - lr * grad`.
    pub fn sgd_step(&mut self, grads: &Gradients, learning_rate: f64) -> Result<()> {
        let g = grads.tensors();
        let mut p = self.parameters_mut();
        if g.len() != p.len() || g.iter().zip(&p).any(|(a, b)| a.len() != b.len()) {
            return Err(Error::Shape("gradients do not match the model parameters".into()));
        }
        for (theta, grad) in p.iter_mut().zip(g) {
            for (t, d) in theta.iter_mut().zip(grad) {
                *t -= learning_rate * d;
            }
        }
        Ok(())
    }
}
