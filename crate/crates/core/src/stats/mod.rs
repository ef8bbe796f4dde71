//! Hypothesis tests for digitization validation and cohort comparison.

mod compare;
mod mwu;
mod normality;
mod parametric;
mod pearson;

use serde::{Deserialize, Serialize};

pub use compare::{compare_bin, compare_cohorts, write_comparison_csv, ComparisonRow, COMPARISON_CSV_HEADER};
pub use mwu::{mann_whitney_u, EXACT_LIMIT};
pub use normality::{ks_normality, ks_statistic, KsCalibration, DEFAULT_KS_REPLICATES};
pub use parametric::{levene, t_test, TVariant};
pub use pearson::{pearson_with_ci, PearsonResult};

/// Which procedure produced a [`TestResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "KS")]
    Ks,
    #[serde(rename = "MWU")]
    Mwu,
    #[serde(rename = "T")]
    T,
    #[serde(rename = "WELCH")]
    Welch,
    #[serde(rename = "LEVENE")]
    Levene,
    #[serde(rename = "PEARSON")]
    Pearson,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Ks => "KS",
            Method::Mwu => "MWU",
            Method::T => "T",
            Method::Welch => "WELCH",
            Method::Levene => "LEVENE",
            Method::Pearson => "PEARSON",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: Method,
    pub n1: usize,
    pub n2: usize,
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased variance (`n - 1` denominator).
pub fn sample_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

pub fn sample_sd(x: &[f64]) -> f64 {
    sample_variance(x).sqrt()
}

pub(crate) fn clamp_p(p: f64) -> f64 {
    if p.is_nan() {
        1.0
    } else {
        p.clamp(0.0, 1.0)
    }
}
