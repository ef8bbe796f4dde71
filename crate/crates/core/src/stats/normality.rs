use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::erf::erfc;

use super::{mean, sample_sd, Method, TestResult};
use crate::error::{Error, Result};

/// Monte Carlo draws used to calibrate one sample size.
pub const DEFAULT_KS_REPLICATES: usize = 10_000;
const MIN_SAMPLE: usize = 4;

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `sup |F_emp - Phi((x - mean) / sd)|` with mean and sd estimated from the
/// sample. `None` when the sample has zero spread.
pub fn ks_statistic(sample: &[f64]) -> Option<f64> {
    let n = sample.len();
    if n < 2 {
        return None;
    }
    let (m, s) = (mean(sample), sample_sd(sample));
    if !(s > 0.0) {
        return None;
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = std_normal_cdf((x - m) / s);
            ((i + 1) as f64 / nf - f).max(f - i as f64 / nf)
        })
        .fold(0.0, f64::max);
    Some(d)
}

/// Null distribution of the estimated-parameter KS statistic for one sample
/// size. The statistic is location/scale free, so one table serves every
/// sample of that size.
#[derive(Debug, Clone)]
pub struct KsCalibration {
    n: usize,
    null_sorted: Vec<f64>,
}

impl KsCalibration {
    pub fn new(n: usize, replicates: usize, seed: u64) -> Result<Self> {
        if n < MIN_SAMPLE {
            return Err(Error::InsufficientSample {
                needed: MIN_SAMPLE,
                got: n,
            });
        }
        if replicates == 0 {
            return Err(Error::InvalidConfig("need at least one calibration replicate".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut buf = vec![0.0; n];
        let mut null_sorted: Vec<f64> = (0..replicates)
            .map(|_| {
                for v in buf.iter_mut() {
                    *v = StandardNormal.sample(&mut rng);
                }
                ks_statistic(&buf).unwrap_or(1.0)
            })
            .collect();
        null_sorted.sort_by(f64::total_cmp);
        Ok(Self { n, null_sorted })
    }

    pub fn sample_size(&self) -> usize {
        self.n
    }

    /// `(1 + #{null >= d}) / (1 + replicates)`.
    pub fn p_value(&self, d: f64) -> f64 {
        let below = self.null_sorted.partition_point(|&v| v < d);
        let at_or_above = self.null_sorted.len() - below;
        (1 + at_or_above) as f64 / (1 + self.null_sorted.len()) as f64
    }

    pub fn test(&self, sample: &[f64]) -> Result<TestResult> {
        if sample.len() != self.n {
            return Err(Error::InvalidInput(format!(
                "calibrated for n = {}, got a sample of {}",
                self.n,
                sample.len()
            )));
        }
        let (statistic, p_value) = match ks_statistic(sample) {
            Some(d) => (d, self.p_value(d)),
            // zero spread: reported as a certain rejection
            None => (1.0, 0.0),
        };
        Ok(TestResult {
            statistic,
            p_value,
            method: Method::Ks,
            n1: self.n,
            n2: 0,
        })
    }
}

/// Normality test with estimated parameters; p-value by seeded Monte Carlo.
pub fn ks_normality(sample: &[f64], seed: u64) -> Result<TestResult> {
    KsCalibration::new(sample.len(), DEFAULT_KS_REPLICATES, seed)?.test(sample)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn statistic_by_hand() {
        // symmetric 4-point sample: mean 0, sd sqrt(5/3)
        let x = [-1.5, -0.5, 0.5, 1.5];
        let s = (5.0f64 / 3.0).sqrt();
        let expect = [-1.5, -0.5, 0.5, 1.5]
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let f = std_normal_cdf(v / s);
                ((i + 1) as f64 / 4.0 - f).max(f - i as f64 / 4.0)
            })
            .fold(0.0, f64::max);
        assert!((ks_statistic(&x).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn constant_sample_rejects() {
        let r = ks_normality(&[2.0; 10], 1).unwrap();
        assert_eq!(r.statistic, 1.0);
        assert_eq!(r.p_value, 0.0);
    }

    #[test]
    fn too_small() {
        assert!(matches!(
            ks_normality(&[1.0, 2.0, 3.0], 1),
            Err(Error::InsufficientSample { needed: 4, got: 3 })
        ));
    }

    #[test]
    fn normal_accepted_uniform_rejected() {
        let calib77 = KsCalibration::new(77, 2000, 9).unwrap();
        let calib106 = KsCalibration::new(106, 2000, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut accepted = 0;
        let mut rejected = 0;
        let reps = 200;
        for _ in 0..reps {
            let x: Vec<f64> = (0..77).map(|_| StandardNormal.sample(&mut rng)).collect();
            if calib77.test(&x).unwrap().p_value > 0.05 {
                accepted += 1;
            }
            let u: Vec<f64> = (0..106).map(|_| rng.gen::<f64>()).collect();
            if calib106.test(&u).unwrap().p_value <= 0.05 {
                rejected += 1;
            }
        }
        assert!(accepted as f64 / reps as f64 >= 0.92, "accepted {accepted}");
        assert!(rejected as f64 / reps as f64 > 0.3, "power {rejected}");
    }

    #[test]
    fn p_value_is_deterministic_in_seed() {
        let x = [0.1, 0.5, -0.3, 1.2, 0.8, -1.1, 0.0];
        assert_eq!(ks_normality(&x, 5).unwrap(), ks_normality(&x, 5).unwrap());
    }
}
