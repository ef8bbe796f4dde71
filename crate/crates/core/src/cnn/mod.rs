//! Beat classifier: a small convolutional network with batch norm, max
//! pooling, dropout and a sigmoid head, trained by plain SGD on binary
//! cross-entropy.
//!
//! Tensors are `H x W x D` with the channel index fastest. Convolutions and
//! dense layers go through a GEMM after unrolling receptive fields.

mod layers;
mod metrics;
mod model;
mod persist;
mod tensor;
mod train;

pub use layers::{
    batch_norm, binary_cross_entropy, conv2d, dense, dropout, max_pool, sigmoid, Activation, BatchNormLayer, BnStats,
    ConvLayer, DenseLayer, Mode, BCE_CLAMP, BN_EPSILON, BN_MOMENTUM,
};
pub use metrics::{Metrics, DECISION_THRESHOLD};
pub use model::{
    miniature_specs, table2_specs, ForwardCache, Gradients, Layer, LayerGrad, LayerSpec, Model, ModelMetadata, Pass,
    BEAT_INPUT, MINIATURE_INPUT, TABLE2_SHAPE_CHAIN,
};
pub use persist::{MODEL_FORMAT, MODEL_VERSION};
pub use tensor::{Dims, Tensor3, TensorBatch};
pub use train::{
    evaluate, fit, image_tensor, predict, split_by_patient, train, train_model, train_repeated, write_curves_csv,
    EpochStats, Example, Interval, LabeledBeat, RepeatSummary, Split, TrainConfig, TrainOutcome, CURVES_CSV_HEADER,
};
