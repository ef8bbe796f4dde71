use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Confusion counts with ARVC as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub accuracy: f64,
    /// Absent when there are no positives.
    pub sensitivity: Option<f64>,
    /// Absent when there are no negatives.
    pub specificity: Option<f64>,
}

pub const DECISION_THRESHOLD: f64 = 0.5;

impl Metrics {
    pub fn from_counts(tp: u64, tn: u64, fp: u64, fn_: u64) -> Result<Self> {
        let total = tp + tn + fp + fn_;
        if total == 0 {
            return Err(Error::InvalidInput("no predictions to score".into()));
        }
        let ratio = |a: u64, b: u64| (a + b > 0).then(|| a as f64 / (a + b) as f64);
        Ok(Self {
            tp,
            tn,
            fp,
            fn_,
            accuracy: (tp + tn) as f64 / total as f64,
            sensitivity: ratio(tp, fn_),
            specificity: ratio(tn, fp),
        })
    }

    /// Scores probabilities against labels at the 0.5 threshold.
    pub fn from_predictions(probs: &[f64], labels: &[bool]) -> Result<Self> {
        if probs.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} predictions for {} labels",
                probs.len(),
                labels.len()
            )));
        }
        let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
        for (&p, &y) in probs.iter().zip(labels) {
            match (p >= DECISION_THRESHOLD, y) {
                (true, true) => tp += 1,
                (false, false) => tn += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
            }
        }
        Self::from_counts(tp, tn, fp, fn_)
    }
}
