//! Patient-level disease posterior from beat-level classifier verdicts.
//!
//! With `n` beats examined and `x` flagged abnormal, the tally is binomial
//! under either hypothesis: success probability `sensitivity` if the
//! patient is affected, `1 - specificity` if healthy. Bayes' rule with the
//! population prior gives the posterior. Everything is evaluated in log
//! space; the binomial coefficient cancels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Population prevalence used when no other prior is supplied.
pub const DEFAULT_PRIOR: f64 = 0.001;

/// Classifier operating point plus prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticProfile {
    /// P(beat flagged abnormal | affected)
    pub sensitivity: f64,
    /// P(beat flagged normal | healthy)
    pub specificity: f64,
    /// P(affected)
    pub prior: f64,
}

impl DiagnosticProfile {
    pub fn new(sensitivity: f64, specificity: f64, prior: f64) -> Result<Self> {
        let p = Self {
            sensitivity,
            specificity,
            prior,
        };
        p.validate()?;
        Ok(p)
    }

    /// Test-set operating point of the reference network (98.80 %
    /// sensitivity, 98.25 % specificity) with the default prior.
    pub fn reference() -> Self {
        Self {
            sensitivity: 0.988,
            specificity: 0.9825,
            prior: DEFAULT_PRIOR,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sensitivity", self.sensitivity), ("specificity", self.specificity)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !(self.prior > 0.0 && self.prior < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "prior must lie strictly inside (0, 1), got {}",
                self.prior
            )));
        }
        Ok(())
    }
}

/// `x` abnormal verdicts out of `n` beats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeatTally {
    pub n: u64,
    pub x: u64,
}

impl BeatTally {
    pub fn new(n: u64, x: u64) -> Result<Self> {
        if x > n {
            return Err(Error::InvalidInput(format!("{x} abnormal beats out of only {n}")));
        }
        Ok(Self { n, x })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    Affected,
    Healthy,
}

/// `k * ln(p)` with the `0 * ln(0) = 0` convention.
fn xlogy(k: u64, p: f64) -> f64 {
    if k == 0 {
        0.0
    } else {
        k as f64 * p.ln()
    }
}

fn ln_choose(n: u64, k: u64) -> f64 {
    use statrs::function::factorial::ln_factorial;
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Log of the tally probability without the binomial coefficient.
fn log_kernel(tally: BeatTally, profile: &DiagnosticProfile, h: Hypothesis) -> f64 {
    let p_flag = match h {
        Hypothesis::Affected => profile.sensitivity,
        Hypothesis::Healthy => 1.0 - profile.specificity,
    };
    xlogy(tally.x, p_flag) + xlogy(tally.n - tally.x, 1.0 - p_flag)
}

/// Binomial probability of the tally under one hypothesis.
pub fn likelihood(tally: BeatTally, profile: &DiagnosticProfile, h: Hypothesis) -> f64 {
    (ln_choose(tally.n, tally.x) + log_kernel(tally, profile, h)).exp()
}

/// P(affected | tally).
pub fn posterior_arvc(tally: BeatTally, profile: &DiagnosticProfile) -> Result<f64> {
    profile.validate()?;
    if tally.x > tally.n {
        return Err(Error::InvalidInput("tally has more abnormal beats than beats".into()));
    }
    let affected = log_kernel(tally, profile, Hypothesis::Affected) + profile.prior.ln();
    let healthy = log_kernel(tally, profile, Hypothesis::Healthy) + (1.0 - profile.prior).ln();
    match (affected.is_finite(), healthy.is_finite()) {
        (false, false) => Err(Error::DegenerateProfile),
        (true, false) => Ok(1.0),
        (false, true) => Ok(0.0),
        // logistic of the log posterior odds
        (true, true) => Ok(1.0 / (1.0 + (healthy - affected).exp())),
    }
}

/// Posterior for every `x` in `0..=n`.
pub fn posterior_curve(n: u64, profile: &DiagnosticProfile) -> Result<Vec<(u64, f64)>> {
    if n == 0 {
        return Err(Error::InvalidInput("curve needs at least one beat".into()));
    }
    (0..=n)
        .map(|x| posterior_arvc(BeatTally { n, x }, profile).map(|p| (x, p)))
        .collect()
}
