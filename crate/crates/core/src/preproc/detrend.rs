use serde::{Deserialize, Serialize};

use super::reflect_index;
use crate::error::{Error, Result};
use crate::signal::Signal;

/// Running-median window length in samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetrendConfig {
    pub order: usize,
}

impl Default for DetrendConfig {
    fn default() -> Self {
        Self { order: 121 }
    }
}

impl DetrendConfig {
    pub fn validate(&self) -> Result<()> {
        if self.order < 3 || self.order % 2 == 0 {
            return Err(Error::InvalidConfig(format!(
                "median order must be odd and at least 3, got {}",
                self.order
            )));
        }
        Ok(())
    }
}

/// Subtracts a centered running median, reflecting the series at both ends.
pub fn detrend_median(sig: &Signal, cfg: &DetrendConfig) -> Result<Signal> {
    cfg.validate()?;
    let x = sig.samples();
    let trend = running_median(x, cfg.order);
    sig.with_samples(x.iter().zip(&trend).map(|(v, m)| v - m).collect())
}

fn running_median(x: &[f64], order: usize) -> Vec<f64> {
    let n = x.len();
    let h = (order / 2) as isize;
    let at = |i: isize| x[reflect_index(i, n)];
    let mut window: Vec<f64> = (-h..=h).map(at).collect();
    window.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(n);
    out.push(window[h as usize]);
    for i in 1..n as isize {
        let leaving = at(i - 1 - h);
        let pos = window.partition_point(|v| v.total_cmp(&leaving).is_lt());
        window.remove(pos);
        let entering = at(i + h);
        let pos = window.partition_point(|v| v.total_cmp(&entering).is_lt());
        window.insert(pos, entering);
        out.push(window[h as usize]);
    }
    out
}
