//! Independent reference implementations shared by the integration tests
//! and the acceptance suite. Each one takes the slow, obvious route.

#![allow(dead_code)]

use ecgkit::cnn::{Model, Pass, TensorBatch};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

/// Single-sided amplitude spectrum by the O(n^2) definition of the DFT,
/// scaled by `2 / n` to match the FFT path.
pub fn direct_dft_amplitudes(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, &v) in x.iter().enumerate() {
                // reduce k*j mod n first so the angle stays small and exact
                let phase = 2.0 * std::f64::consts::PI * ((k * j) % n) as f64 / n as f64;
                let (s, c) = phase.sin_cos();
                re += v * c;
                im -= v * s;
            }
            2.0 / n as f64 * re.hypot(im)
        })
        .collect()
}

/// Midranks of the pooled sample, ties sharing the average rank.
pub fn midranks(pooled: &[f64]) -> Vec<f64> {
    pooled
        .iter()
        .map(|&v| {
            let below = pooled.iter().filter(|&&u| u < v).count() as f64;
            let equal = pooled.iter().filter(|&&u| u == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Two-sided rank-sum p-value by listing every way to pick `a.len()` of the
/// pooled ranks. Returns `(W, p)` with `W` the rank sum of `a`.
pub fn mwu_by_enumeration(a: &[f64], b: &[f64]) -> (f64, f64) {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let (n1, n) = (a.len(), pooled.len());
    let w: f64 = ranks[..n1].iter().sum();
    let centre = n1 as f64 * (n as f64 + 1.0) / 2.0;
    let observed = (w - centre).abs();
    let (mut extreme, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        total += 1;
        // ranks are multiples of 1/2, so sums compare exactly
        if (s - centre).abs() >= observed {
            extreme += 1;
        }
    }
    (w, extreme as f64 / total as f64)
}

fn rational(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite")
}

fn pow(base: &BigRational, e: u64) -> BigRational {
    (0..e).fold(BigRational::one(), |acc, _| acc * base)
}

/// Posterior of the affected hypothesis in exact rational arithmetic:
/// prior * P(x | affected) over the sum across both hypotheses.
pub fn posterior_exact(n: u64, x: u64, sensitivity: f64, specificity: f64, prior: f64) -> Option<f64> {
    let (se, sp, pi) = (rational(sensitivity), rational(specificity), rational(prior));
    let one = BigRational::one();
    let choose = {
        let mut c = BigInt::one();
        for i in 0..x {
            c = c * BigInt::from(n - i) / BigInt::from(i + 1);
        }
        BigRational::from_integer(c)
    };
    let flag_healthy = &one - &sp;
    let affected = &pi * &choose * pow(&se, x) * pow(&(&one - &se), n - x);
    let healthy = (&one - &pi) * &choose * pow(&flag_healthy, x) * pow(&sp, n - x);
    let total = &affected + &healthy;
    if total.is_zero() {
        return None;
    }
    (affected / total).to_f64()
}

/// Pearson r from the textbook sums.
pub fn pearson_r(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let sab: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let saa: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let sbb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    sab / (saa * sbb).sqrt()
}

/// Copy of `model` with every parameter nudged by up to `scale`. Fresh
/// models have zero biases, which can park a ReLU exactly on its kink where
/// central differences see half a slope.
pub fn jittered(model: &Model, scale: f64, seed: u64) -> Model {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = model.clone();
    for t in out.parameters_mut() {
        for v in t.iter_mut() {
            *v += rng.gen_range(-scale..scale);
        }
    }
    out
}

/// Largest relative disagreement between backprop and central differences
/// over every parameter of `model`. The dropout seed is held fixed so each
/// perturbed pass sees the same masks.
pub fn gradient_check(model: &Model, x: &TensorBatch, labels: &[f64], dropout_seed: u64) -> f64 {
    let pass = Pass::Train { dropout_seed };
    let cache = model.forward(x.clone(), pass).expect("forward");
    let grads = model.backward(&cache, labels).expect("backward");
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();
    let loss = |m: &Model| Model::mean_loss(&m.predict_batch(x.clone(), pass).expect("forward"), labels);

    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (t, grad) in analytic.iter().enumerate() {
        for i in 0..grad.len() {
            let theta = probe.parameters_mut()[t][i];
            let h = 1e-4 * theta.abs().max(1.0);
            probe.parameters_mut()[t][i] = theta + h;
            let up = loss(&probe);
            probe.parameters_mut()[t][i] = theta - h;
            let down = loss(&probe);
            probe.parameters_mut()[t][i] = theta;
            let numeric = (up - down) / (2.0 * h);
            let scale = numeric.abs().max(grad[i].abs()).max(1e-7);
            worst = worst.max((numeric - grad[i]).abs() / scale);
        }
    }
    worst
}
