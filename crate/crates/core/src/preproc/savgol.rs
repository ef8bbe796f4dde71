use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Signal;

/// Savitzky–Golay window length (odd) and polynomial degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmoothConfig {
    pub window: usize,
    pub degree: usize,
}

impl Default for SmoothConfig {
    fn default() -> Self {
        Self { window: 21, degree: 3 }
    }
}

impl SmoothConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window % 2 == 0 || self.window < 3 {
            return Err(Error::InvalidConfig(format!(
                "smoothing window must be odd and at least 3, got {}",
                self.window
            )));
        }
        if self.degree >= self.window {
            return Err(Error::InvalidConfig(format!(
                "degree {} must be below window {}",
                self.degree, self.window
            )));
        }
        Ok(())
    }
}

/// Hat matrix of the least-squares polynomial fit over one window: row `i`
/// maps the window samples to the fitted value at position `i`.
fn hat_matrix(cfg: &SmoothConfig) -> Result<DMatrix<f64>> {
    let w = cfg.window;
    let h = (w / 2) as f64;
    let vander = DMatrix::from_fn(w, cfg.degree + 1, |i, j| (i as f64 - h).powi(j as i32));
    let gram = vander.transpose() * &vander;
    let inv = gram
        .try_inverse()
        .ok_or_else(|| Error::InvalidConfig("singular smoothing design".into()))?;
    Ok(&vander * inv * vander.transpose())
}

/// Centered least-squares polynomial smoothing. Near the ends, where a full
/// centered window does not fit, the polynomial fitted to the first (last)
/// `window` samples is evaluated instead, so polynomials up to `degree` are
/// reproduced everywhere.
pub fn savgol_smooth(sig: &Signal, cfg: &SmoothConfig) -> Result<Signal> {
    cfg.validate()?;
    let x = sig.samples();
    let (n, w) = (x.len(), cfg.window);
    if w > n {
        return Err(Error::InvalidConfig(format!(
            "smoothing window {w} longer than signal ({n} samples)"
        )));
    }
    let hat = hat_matrix(cfg)?;
    let h = w / 2;
    let dot = |row: usize, start: usize| -> f64 { (0..w).map(|j| hat[(row, j)] * x[start + j]).sum() };
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let v = if i < h {
            dot(i, 0)
        } else if i + h >= n {
            dot(w - (n - i), n - w)
        } else {
            dot(h, i - h)
        };
        out.push(v);
    }
    sig.with_samples(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn variance(x: &[f64]) -> f64 {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
    }

    #[test]
    fn classic_five_point_quadratic_weights() {
        // textbook coefficients (-3, 12, 17, 12, -3) / 35
        let hat = hat_matrix(&SmoothConfig { window: 5, degree: 2 }).unwrap();
        let expect = [-3.0, 12.0, 17.0, 12.0, -3.0];
        for (j, e) in expect.iter().enumerate() {
            assert!((hat[(2, j)] - e / 35.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cubic_is_reproduced() {
        let x: Vec<f64> = (0..200)
            .map(|t| {
                let t = t as f64 * 0.05;
                0.3 - 1.2 * t + 0.4 * t * t - 0.02 * t * t * t
            })
            .collect();
        let s = Signal::new(x.clone(), 1.0, 0.0).unwrap();
        let out = savgol_smooth(&s, &SmoothConfig::default()).unwrap();
        for (a, b) in out.samples().iter().zip(&x) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn constant_is_unchanged() {
        let s = Signal::new(vec![-0.7; 50], 1.0, 0.0).unwrap();
        let out = savgol_smooth(&s, &SmoothConfig::default()).unwrap();
        assert!(out.samples().iter().all(|v| (v + 0.7).abs() < 1e-12));
    }

    #[test]
    fn white_noise_variance_drops() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..2000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = Signal::new(x.clone(), 1.0, 0.0).unwrap();
        let out = savgol_smooth(&s, &SmoothConfig::default()).unwrap();
        assert!(variance(out.samples()) < variance(&x));
    }

    #[test]
    fn invalid_configs() {
        let s = Signal::new(vec![0.0; 10], 1.0, 0.0).unwrap();
        assert!(savgol_smooth(&s, &SmoothConfig::default()).is_err());
        assert!(SmoothConfig { window: 20, degree: 3 }.validate().is_err());
        assert!(SmoothConfig { window: 5, degree: 5 }.validate().is_err());
    }
}
