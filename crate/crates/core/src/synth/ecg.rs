use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Signal;

/// Signed peak amplitudes in mV (Q and S are negative deflections).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveAmplitudes {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
    pub t: f64,
}

/// Gaussian standard deviations in ms. `s` is the down-slope of S; its
/// upstroke is set by [`EcgParams::s_upstroke_ms`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveWidths {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
    pub t: f64,
}

/// Wave centres relative to the R peak, in ms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveOffsets {
    pub p: f64,
    pub q: f64,
    pub s: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonWave {
    pub present: bool,
    pub amplitude_mv: f64,
    /// Centre of the bump after the R peak.
    pub delay_ms: f64,
    pub width_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub amplitude_mv: f64,
    pub period_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcgParams {
    pub heart_rate: f64,
    pub amplitudes: WaveAmplitudes,
    pub widths: WaveWidths,
    pub offsets: WaveOffsets,
    /// +1 upright T, -1 inverted.
    pub t_polarity: f64,
    pub epsilon_wave: EpsilonWave,
    /// Terminal activation duration: S nadir back to baseline (3 sigma).
    pub s_upstroke_ms: f64,
    pub noise_sd: f64,
    pub drift: Drift,
    /// Position of the first R peak as a fraction of one RR interval.
    pub phase: f64,
    pub sample_rate_hz: f64,
    pub seed: u64,
}

pub const MAX_EPSILON_MV: f64 = 0.3;

impl EcgParams {
    pub fn normal(seed: u64) -> Self {
        Self {
            heart_rate: 75.0,
            amplitudes: WaveAmplitudes {
                p: 0.15,
                q: -0.1,
                r: 1.2,
                s: -0.25,
                t: 0.3,
            },
            widths: WaveWidths {
                p: 20.0,
                q: 8.0,
                r: 10.0,
                s: 10.0,
                t: 45.0,
            },
            offsets: WaveOffsets {
                p: -160.0,
                q: -25.0,
                s: 25.0,
                t: 280.0,
            },
            t_polarity: 1.0,
            epsilon_wave: EpsilonWave {
                present: false,
                amplitude_mv: 0.1,
                delay_ms: 95.0,
                width_ms: 6.0,
            },
            s_upstroke_ms: 40.0,
            noise_sd: 0.0,
            drift: Drift {
                amplitude_mv: 0.0,
                period_s: 1.5,
            },
            phase: 0.5,
            sample_rate_hz: 500.0,
            seed,
        }
    }

    /// Normal morphology plus the ARVC markers: an epsilon bump after the
    /// QRS, a 60 ms terminal activation and an inverted T wave.
    pub fn arvc(seed: u64) -> Self {
        let mut p = Self::normal(seed);
        p.t_polarity = -1.0;
        p.epsilon_wave.present = true;
        p.s_upstroke_ms = 60.0;
        p
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(30.0..=220.0).contains(&self.heart_rate) {
            return bad(format!("heart rate {} bpm outside [30, 220]", self.heart_rate));
        }
        let w = &self.widths;
        if [w.p, w.q, w.r, w.s, w.t, self.s_upstroke_ms, self.epsilon_wave.width_ms]
            .iter()
            .any(|v| !(v.is_finite() && *v > 0.0))
        {
            return bad("wave widths must be positive".into());
        }
        if self.epsilon_wave.amplitude_mv.abs() > MAX_EPSILON_MV {
            return bad(format!("epsilon amplitude above {MAX_EPSILON_MV} mV"));
        }
        if self.t_polarity.abs() != 1.0 {
            return bad("T polarity must be +1 or -1".into());
        }
        if !(self.noise_sd >= 0.0) || !(self.drift.period_s > 0.0) || !self.drift.amplitude_mv.is_finite() {
            return bad("noise and drift must be finite and non-negative".into());
        }
        if !(0.0..1.0).contains(&self.phase) {
            return bad(format!("phase {} outside [0, 1)", self.phase));
        }
        if !(self.sample_rate_hz > 0.0) {
            return bad("sample rate must be positive".into());
        }
        Ok(())
    }

    pub fn rr_ms(&self) -> f64 {
        60_000.0 / self.heart_rate
    }
}

/// Ground-truth wave centres of one beat, in ms from the strip start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeatLandmarks {
    pub p_ms: f64,
    pub q_ms: f64,
    pub r_ms: f64,
    pub s_ms: f64,
    pub t_ms: f64,
    pub epsilon_ms: Option<f64>,
}

/// A generated strip with the truth behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticEcg {
    pub signal: Signal,
    pub params: EcgParams,
    /// Beats whose R peak lies inside the strip.
    pub landmarks: Vec<BeatLandmarks>,
}

impl SyntheticEcg {
    pub fn r_times_ms(&self) -> Vec<f64> {
        self.landmarks.iter().map(|l| l.r_ms).collect()
    }

    /// Nearest sample to each R time.
    pub fn r_indices(&self) -> Vec<usize> {
        let dt = self.signal.sample_period();
        self.landmarks
            .iter()
            .map(|l| ((l.r_ms - self.signal.t0()) / dt).round() as usize)
            .collect()
    }
}

/// Contributions further than this from the R peak are dropped; every wave
/// has decayed below 1e-40 there.
const SUPPORT_MS: f64 = 1000.0;

fn gauss(dt: f64, sigma: f64) -> f64 {
    (-0.5 * (dt / sigma).powi(2)).exp()
}

/// One beat at offset `dt` (ms) from its R peak, without noise or drift.
pub fn beat_value(p: &EcgParams, dt: f64) -> f64 {
    if dt.abs() > SUPPORT_MS {
        return 0.0;
    }
    let (a, w, o) = (&p.amplitudes, &p.widths, &p.offsets);
    let s_dt = dt - o.s;
    let s_sigma = if s_dt < 0.0 { w.s } else { p.s_upstroke_ms / 3.0 };
    let mut v = a.p * gauss(dt - o.p, w.p)
        + a.q * gauss(dt - o.q, w.q)
        + a.r * gauss(dt, w.r)
        + a.s * gauss(s_dt, s_sigma)
        + p.t_polarity * a.t * gauss(dt - o.t, w.t);
    let eps = &p.epsilon_wave;
    if eps.present {
        v += eps.amplitude_mv * gauss(dt - eps.delay_ms, eps.width_ms);
    }
    v
}

/// Sum-of-Gaussians ECG. Beats repeat every RR interval, including beats
/// centred just outside the strip so both ends look like the middle.
pub fn generate_ecg(params: &EcgParams, duration_s: f64) -> Result<SyntheticEcg> {
    params.validate()?;
    let rr = params.rr_ms();
    let duration_ms = duration_s * 1000.0;
    if !(duration_ms >= rr) {
        return Err(Error::InvalidConfig(format!(
            "duration {duration_s} s is shorter than one beat ({rr} ms)"
        )));
    }
    let period = 1000.0 / params.sample_rate_hz;
    let n = (duration_ms / period).round() as usize;
    let first_r = params.phase * rr;
    // beat k sits at first_r + k rr; include every beat that reaches the strip
    let k_lo = (-(first_r + SUPPORT_MS) / rr).floor() as i64;
    let k_hi = ((duration_ms + SUPPORT_MS - first_r) / rr).ceil() as i64;
    let r_times: Vec<f64> = (k_lo..=k_hi).map(|k| first_r + k as f64 * rr).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let noise = Normal::new(0.0, params.noise_sd.max(f64::MIN_POSITIVE)).expect("sd is positive");
    let drift_phase: f64 = if params.drift.amplitude_mv != 0.0 {
        rng.gen_range(0.0..std::f64::consts::TAU)
    } else {
        0.0
    };
    let drift_w = std::f64::consts::TAU / (params.drift.period_s * 1000.0);
    let samples: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 * period;
            // beats are sorted; only the few near t contribute
            let lo = r_times.partition_point(|&r| r < t - SUPPORT_MS);
            let mut v: f64 = r_times[lo..]
                .iter()
                .take_while(|&&r| r <= t + SUPPORT_MS)
                .map(|&r| beat_value(params, t - r))
                .sum();
            if params.drift.amplitude_mv != 0.0 {
                v += params.drift.amplitude_mv * (drift_w * t + drift_phase).sin();
            }
            if params.noise_sd > 0.0 {
                v += noise.sample(&mut rng);
            }
            v
        })
        .collect();
    let signal = Signal::new(samples, period, 0.0)?;
    let o = &params.offsets;
    let landmarks = r_times
        .iter()
        .filter(|&&r| r >= 0.0 && r < n as f64 * period)
        .map(|&r| BeatLandmarks {
            p_ms: r + o.p,
            q_ms: r + o.q,
            r_ms: r,
            s_ms: r + o.s,
            t_ms: r + o.t,
            epsilon_ms: params.epsilon_wave.present.then_some(r + params.epsilon_wave.delay_ms),
        })
        .collect();
    Ok(SyntheticEcg {
        signal,
        params: params.clone(),
        landmarks,
    })
}
