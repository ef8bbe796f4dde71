use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::metrics::Metrics;
use super::model::{Model, Pass};
use super::tensor::{Dims, Tensor3, TensorBatch};
use crate::error::{Error, Result};
use crate::preproc::{augment, BeatImage, BEAT_IMAGE_SIZE};
use crate::signal::fmt_sig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Share of patients (per class) that go to the training side.
    pub split_ratio: f64,
    pub seed: u64,
    /// Distorted copies added per training beat; 0 disables augmentation.
    pub augment_copies: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 100,
            batch_size: 32,
            split_ratio: 0.8,
            seed: 0,
            augment_copies: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "split ratio must lie in (0, 1), got {}",
                self.split_ratio
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        Ok(())
    }
}

/// A beat raster with its class (true = ARVC) and source patient.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBeat {
    pub image: BeatImage,
    pub label: bool,
    pub patient_id: String,
}

/// A network input with its class and source patient.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub input: Tensor3,
    pub label: bool,
    pub patient_id: String,
}

/// Network input for a beat raster: ink intensity `1 - gray`, so the trace
/// is bright on a zero background.
pub fn image_tensor(img: &BeatImage) -> Tensor3 {
    let data = img.pixels().iter().map(|p| 1.0 - p).collect();
    Tensor3::new(Dims::new(BEAT_IMAGE_SIZE, BEAT_IMAGE_SIZE, 1), data).expect("beat pixels lie in [0, 1]")
}

fn tensor_image(t: &Tensor3) -> Result<BeatImage> {
    BeatImage::new(t.data().iter().map(|v| (1.0 - v).clamp(0.0, 1.0)).collect())
}

impl From<&LabeledBeat> for Example {
    fn from(b: &LabeledBeat) -> Self {
        Self {
            input: image_tensor(&b.image),
            label: b.label,
            patient_id: b.patient_id.clone(),
        }
    }
}

/// Indices of the training and test examples and the patients behind them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub train_patients: Vec<String>,
    pub test_patients: Vec<String>,
}

/// Shuffles patients and sends `ratio` of them to training, separately for
/// each class so both sides see both classes. A patient's class is the
/// majority label of its beats (ties count as ARVC).
pub fn split_by_patient(examples: &[Example], ratio: f64, seed: u64) -> Result<Split> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "split ratio must lie in (0, 1), got {ratio}"
        )));
    }
    let positives = examples.iter().filter(|e| e.label).count();
    if positives == 0 || positives == examples.len() {
        return Err(Error::InvalidDataset("training needs both classes".into()));
    }
    // patient -> (positive beats, total beats); BTreeMap keeps the order seed-stable
    let mut patients: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for e in examples {
        let entry = patients.entry(e.patient_id.as_str()).or_default();
        entry.0 += e.label as usize;
        entry.1 += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_patients = Vec::new();
    let mut test_patients = Vec::new();
    for class in [false, true] {
        let mut group: Vec<&str> = patients
            .iter()
            .filter(|(_, (pos, total))| (2 * pos >= *total) == class)
            .map(|(p, _)| *p)
            .collect();
        group.shuffle(&mut rng);
        let n = group.len();
        let n_train = if n < 2 {
            n
        } else {
            ((ratio * n as f64).round() as usize).clamp(1, n - 1)
        };
        train_patients.extend(group[..n_train].iter().map(|p| p.to_string()));
        test_patients.extend(group[n_train..].iter().map(|p| p.to_string()));
    }
    if test_patients.is_empty() || train_patients.is_empty() {
        return Err(Error::InvalidDataset("too few patients for a train/test split".into()));
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (i, e) in examples.iter().enumerate() {
        if train_patients.iter().any(|p| *p == e.patient_id) {
            train.push(i);
        } else {
            test.push(i);
        }
    }
    assert!(
        train_patients.iter().all(|p| !test_patients.contains(p)),
        "a patient landed on both sides of the split"
    );
    train_patients.sort();
    test_patients.sort();
    Ok(Split {
        train,
        test,
        train_patients,
        test_patients,
    })
}

/// Loss and accuracy after one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_loss: Option<f64>,
    pub test_acc: Option<f64>,
}

pub const CURVES_CSV_HEADER: &str = "epoch,train_loss,train_acc,test_loss,test_acc";

pub fn write_curves_csv<W: Write>(curves: &[EpochStats], mut writer: W) -> Result<()> {
    writeln!(writer, "{CURVES_CSV_HEADER}")?;
    let opt = |v: Option<f64>| v.map(fmt_sig).unwrap_or_default();
    for c in curves {
        writeln!(
            writer,
            "{},{},{},{},{}",
            c.epoch,
            fmt_sig(c.train_loss),
            fmt_sig(c.train_acc),
            opt(c.test_loss),
            opt(c.test_acc)
        )?;
    }
    Ok(())
}

const PREDICT_CHUNK: usize = 16;

/// Sigmoid outputs in inference mode.
pub fn predict(model: &Model, inputs: &[Tensor3]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(inputs.len());
    for chunk in inputs.chunks(PREDICT_CHUNK) {
        out.extend(model.predict_batch(TensorBatch::from_samples(chunk)?, Pass::Infer)?);
    }
    Ok(out)
}

pub fn evaluate(model: &Model, examples: &[Example]) -> Result<Metrics> {
    if examples.is_empty() {
        return Err(Error::InvalidInput("nothing to evaluate".into()));
    }
    let inputs: Vec<Tensor3> = examples.iter().map(|e| e.input.clone()).collect();
    let labels: Vec<bool> = examples.iter().map(|e| e.label).collect();
    Metrics::from_predictions(&predict(model, &inputs)?, &labels)
}

fn loss_and_accuracy(probs: &[f64], labels: &[f64]) -> (f64, f64) {
    let correct = probs
        .iter()
        .zip(labels)
        .filter(|(p, y)| (**p >= 0.5) == (**y >= 0.5))
        .count();
    (Model::mean_loss(probs, labels), correct as f64 / probs.len() as f64)
}

fn label_value(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Plain minibatch SGD over `train`, scoring `test` after every epoch.
pub fn fit(
    mut model: Model,
    train: &[Example],
    test: &[Example],
    cfg: &TrainConfig,
) -> Result<(Model, Vec<EpochStats>)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidDataset("empty training set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let test_inputs: Vec<Tensor3> = test.iter().map(|e| e.input.clone()).collect();
    let test_labels: Vec<f64> = test.iter().map(|e| label_value(e.label)).collect();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut curves = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for idx in order.chunks(cfg.batch_size) {
            let samples: Vec<Tensor3> = idx.iter().map(|&i| train[i].input.clone()).collect();
            let labels: Vec<f64> = idx.iter().map(|&i| label_value(train[i].label)).collect();
            let cache = model.forward(
                TensorBatch::from_samples(&samples)?,
                Pass::Train {
                    dropout_seed: rng.gen(),
                },
            )?;
            let (loss, acc) = loss_and_accuracy(cache.output(), &labels);
            loss_sum += loss * idx.len() as f64;
            correct += (acc * idx.len() as f64).round() as usize;
            let grads = model.backward(&cache, &labels)?;
            drop(samples);
            model.update_running_stats(&cache);
            drop(cache);
            model.sgd_step(&grads, cfg.learning_rate)?;
        }
        let (test_loss, test_acc) = if test.is_empty() {
            (None, None)
        } else {
            let probs = predict(&model, &test_inputs)?;
            let (l, a) = loss_and_accuracy(&probs, &test_labels);
            (Some(l), Some(a))
        };
        curves.push(EpochStats {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            train_acc: correct as f64 / train.len() as f64,
            test_loss,
            test_acc,
        });
        model.metadata.epochs_trained += 1;
    }
    Ok((model, curves))
}

/// Result of one split-and-train run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub curves: Vec<EpochStats>,
    pub split: Split,
    pub test_metrics: Metrics,
}

/// Splits by patient, optionally augments the training side, and fits
/// `model`. The test side is never augmented.
pub fn train_model(model: Model, examples: &[Example], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let split = split_by_patient(examples, cfg.split_ratio, cfg.seed)?;
    let mut train: Vec<Example> = split.train.iter().map(|&i| examples[i].clone()).collect();
    if cfg.augment_copies > 0 {
        let mut extra = Vec::with_capacity(train.len() * cfg.augment_copies);
        for (k, e) in train.iter().enumerate() {
            let img = tensor_image(&e.input)?;
            let seed = cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k as u64);
            for copy in augment(&img, seed, cfg.augment_copies) {
                extra.push(Example {
                    input: image_tensor(&copy),
                    label: e.label,
                    patient_id: e.patient_id.clone(),
                });
            }
        }
        train.extend(extra);
    }
    let test: Vec<Example> = split.test.iter().map(|&i| examples[i].clone()).collect();
    let (mut model, curves) = fit(model, &train, &test, cfg)?;
    let test_metrics = evaluate(&model, &test)?;
    model.metadata.config = Some(cfg.clone());
    model.metadata.metrics = Some(test_metrics);
    Ok(TrainOutcome {
        model,
        curves,
        split,
        test_metrics,
    })
}

/// Trains the reference network on beat rasters.
pub fn train(beats: &[LabeledBeat], cfg: &TrainConfig) -> Result<TrainOutcome> {
    let examples: Vec<Example> = beats.iter().map(Example::from).collect();
    train_model(Model::table2(cfg.seed)?, &examples, cfg)
}

/// Mean with a 95 % t-interval over repeated runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        if values.len() == 1 {
            return Some(Self {
                mean,
                lower: mean,
                upper: mean,
            });
        }
        let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let t = StudentsT::new(0.0, 1.0, n - 1.0).expect("n >= 2").inverse_cdf(0.975);
        let half = t * sd / n.sqrt();
        Some(Self {
            mean,
            lower: mean - half,
            upper: mean + half,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub runs: Vec<Metrics>,
    pub accuracy: Interval,
    pub sensitivity: Option<Interval>,
    pub specificity: Option<Interval>,
}

impl RepeatSummary {
    pub fn from_runs(runs: Vec<Metrics>) -> Result<Self> {
        let acc: Vec<f64> = runs.iter().map(|m| m.accuracy).collect();
        let sens: Vec<f64> = runs.iter().filter_map(|m| m.sensitivity).collect();
        let spec: Vec<f64> = runs.iter().filter_map(|m| m.specificity).collect();
        Ok(Self {
            accuracy: Interval::from_values(&acc).ok_or_else(|| Error::InvalidInput("no runs".into()))?,
            sensitivity: Interval::from_values(&sens),
            specificity: Interval::from_values(&spec),
            runs,
        })
    }
}

/// Repeated reshuffle-split-train runs; run `r` uses seed `cfg.seed + r`.
/// `build` creates a fresh model for a given seed.
pub fn train_repeated(
    examples: &[Example],
    cfg: &TrainConfig,
    repeats: usize,
    build: impl Fn(u64) -> Result<Model>,
) -> Result<(RepeatSummary, TrainOutcome)> {
    if repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be at least 1".into()));
    }
    let mut runs = Vec::with_capacity(repeats);
    let mut first = None;
    for r in 0..repeats {
        let run_cfg = TrainConfig {
            seed: cfg.seed.wrapping_add(r as u64),
            ..cfg.clone()
        };
        let outcome = train_model(build(run_cfg.seed)?, examples, &run_cfg)?;
        runs.push(outcome.test_metrics);
        if first.is_none() {
            first = Some(outcome);
        }
    }
    Ok((RepeatSummary::from_runs(runs)?, first.expect("at least one run")))
}
