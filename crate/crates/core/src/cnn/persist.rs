//! JSON model files. Parameter arrays are base64 strings of little-endian
//! `f64` values so files round-trip bit for bit.

use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::layers::{BatchNormLayer, ConvLayer, DenseLayer};
use super::model::{Layer, Model, ModelMetadata};
use super::tensor::Dims;
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "ecgkit-cnn";
pub const MODEL_VERSION: u32 = 1;

mod b64 {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let text = String::deserialize(d)?;
        let bytes = STANDARD.decode(text).map_err(serde::de::Error::custom)?;
        if bytes.len() % 8 != 0 {
            return Err(serde::de::Error::custom(
                "parameter blob is not a whole number of f64 values",
            ));
        }
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect())
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LayerDoc {
    Conv {
        m: usize,
        n: usize,
        d: usize,
        s: usize,
        #[serde(with = "b64")]
        kernels: Vec<f64>,
        #[serde(with = "b64")]
        biases: Vec<f64>,
    },
    BatchNorm {
        channels: usize,
        epsilon: f64,
        momentum: f64,
        #[serde(with = "b64")]
        gamma: Vec<f64>,
        #[serde(with = "b64")]
        beta: Vec<f64>,
        #[serde(with = "b64")]
        running_mean: Vec<f64>,
        #[serde(with = "b64")]
        running_var: Vec<f64>,
    },
    Relu,
    MaxPool {
        m: usize,
        n: usize,
    },
    Flatten,
    Dense {
        inputs: usize,
        outputs: usize,
        #[serde(with = "b64")]
        weights: Vec<f64>,
        #[serde(with = "b64")]
        biases: Vec<f64>,
    },
    Dropout {
        rate: f64,
    },
    Sigmoid,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelDoc {
    format: String,
    version: u32,
    input_dims: Dims,
    layers: Vec<LayerDoc>,
    metadata: ModelMetadata,
}

impl From<&Layer> for LayerDoc {
    fn from(layer: &Layer) -> Self {
        match layer {
            Layer::Conv(c) => LayerDoc::Conv {
                m: c.m,
                n: c.n,
                d: c.d,
                s: c.s,
                kernels: c.kernels.clone(),
                biases: c.biases.clone(),
            },
            Layer::BatchNorm(b) => LayerDoc::BatchNorm {
                channels: b.channels(),
                epsilon: b.epsilon,
                momentum: b.momentum,
                gamma: b.gamma.clone(),
                beta: b.beta.clone(),
                running_mean: b.running_mean.clone(),
                running_var: b.running_var.clone(),
            },
            Layer::Relu => LayerDoc::Relu,
            Layer::MaxPool { m, n } => LayerDoc::MaxPool { m: *m, n: *n },
            Layer::Flatten => LayerDoc::Flatten,
            Layer::Dense(d) => LayerDoc::Dense {
                inputs: d.inputs,
                outputs: d.outputs,
                weights: d.weights.clone(),
                biases: d.biases.clone(),
            },
            Layer::Dropout { rate } => LayerDoc::Dropout { rate: *rate },
            Layer::Sigmoid => LayerDoc::Sigmoid,
        }
    }
}

impl TryFrom<LayerDoc> for Layer {
    type Error = Error;

    fn try_from(doc: LayerDoc) -> Result<Self> {
        Ok(match doc {
            LayerDoc::Conv {
                m,
                n,
                d,
                s,
                kernels,
                biases,
            } => Layer::Conv(ConvLayer::new(m, n, d, s, kernels, biases)?),
            LayerDoc::BatchNorm {
                channels,
                epsilon,
                momentum,
                gamma,
                beta,
                running_mean,
                running_var,
            } => {
                if gamma.len() != channels {
                    return Err(Error::ModelFormat(format!(
                        "batch norm declares {channels} channels but stores {}",
                        gamma.len()
                    )));
                }
                Layer::BatchNorm(BatchNormLayer {
                    gamma,
                    beta,
                    running_mean,
                    running_var,
                    epsilon,
                    momentum,
                })
            }
            LayerDoc::Relu => Layer::Relu,
            LayerDoc::MaxPool { m, n } => Layer::MaxPool { m, n },
            LayerDoc::Flatten => Layer::Flatten,
            LayerDoc::Dense {
                inputs,
                outputs,
                weights,
                biases,
            } => Layer::Dense(DenseLayer::new(inputs, outputs, weights, biases)?),
            LayerDoc::Dropout { rate } => Layer::Dropout { rate },
            LayerDoc::Sigmoid => Layer::Sigmoid,
        })
    }
}

impl Model {
    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDoc {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            input_dims: self.input_dims(),
            layers: self.layers().iter().map(LayerDoc::from).collect(),
            metadata: self.metadata.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if doc.format != MODEL_FORMAT || doc.version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!(
                "expected {MODEL_FORMAT} v{MODEL_VERSION}, found {} v{}",
                doc.format, doc.version
            )));
        }
        let layers = doc
            .layers
            .into_iter()
            .map(Layer::try_from)
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::ModelFormat(e.to_string()))?;
        Model::from_layers(doc.input_dims, layers, doc.metadata).map_err(|e| Error::ModelFormat(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let mut m = Model::miniature(4).unwrap();
        m.metadata.epochs_trained = 3;
        if let Layer::BatchNorm(bn) = &mut m.layers_mut_for_test()[1] {
            bn.running_var[0] = 0.123_456_789_012_345_67;
        }
        let back = Model::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_foreign_documents() {
        assert!(matches!(Model::from_json("{}"), Err(Error::ModelFormat(_))));
        let text = Model::miniature(1)
            .unwrap()
            .to_json()
            .unwrap()
            .replace(MODEL_FORMAT, "other");
        assert!(matches!(Model::from_json(&text), Err(Error::ModelFormat(_))));
    }

    #[test]
    fn rejects_miswired_layers() {
        let text = Model::miniature(1).unwrap().to_json().unwrap();
        let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        doc["input_dims"]["h"] = 13.into();
        assert!(matches!(Model::from_json(&doc.to_string()), Err(Error::ModelFormat(_))));
    }
}
