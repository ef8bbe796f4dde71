use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{clamp_p, mean};
use crate::error::{Error, Result};

/// Correlation with its two-sided p-value and 95 % Fisher-z interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PearsonResult {
    pub r: f64,
    pub p_value: f64,
    pub ci95: (f64, f64),
    pub n: usize,
}

const Z_95: f64 = 1.96;

pub fn pearson_with_ci(a: &[f64], b: &[f64]) -> Result<PearsonResult> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "paired samples differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 3 {
        return Err(Error::InsufficientSample { needed: 3, got: n });
    }
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation("a sample has zero variance".into()));
    }
    let r = (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p_value = if r.abs() >= 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
        clamp_p(2.0 * dist.cdf(-t.abs()))
    };
    let ci95 = if r.abs() >= 1.0 {
        (r, r)
    } else if n == 3 {
        (-1.0, 1.0)
    } else {
        let z = r.atanh();
        let half = Z_95 / ((n - 3) as f64).sqrt();
        ((z - half).tanh(), (z + half).tanh())
    };
    Ok(PearsonResult { r, p_value, ci95, n })
}
