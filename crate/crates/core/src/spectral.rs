//! Normalized amplitude spectra of detrended lead signals and cohort tables.
//!
//! The single-sided amplitude at bin `k` is `2 |(1/N) sum_t y_t e^{-2 pi i k t / N}|`
//! for `k = 0 ..= N/2`. Spectra are compared on a fixed 1–20 Hz grid with a
//! 0.25 Hz step, which is exactly the bin spacing of 2200 samples at 550 Hz.

use std::io::{Read, Write};
use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::signal::{fmt_sig, Signal};

pub const GRID_RATE_HZ: f64 = 550.0;
pub const GRID_LEN: usize = 2200;
pub const BAND_LOW_HZ: f64 = 1.0;
pub const BAND_HIGH_HZ: f64 = 20.0;
pub const BAND_STEP_HZ: f64 = 0.25;

const BIN_TOLERANCE_HZ: f64 = 1e-9;

/// Amplitudes on an increasing frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeSpectrum {
    pub frequencies: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub n_samples: usize,
    pub sample_rate: f64,
}

/// The 77 analysis frequencies, 1.00 to 20.00 Hz.
pub fn band_grid() -> Vec<f64> {
    let count = ((BAND_HIGH_HZ - BAND_LOW_HZ) / BAND_STEP_HZ).round() as usize + 1;
    (0..count).map(|i| BAND_LOW_HZ + i as f64 * BAND_STEP_HZ).collect()
}

/// Single-sided amplitude spectrum up to the Nyquist bin.
pub fn amplitude_spectrum(sig: &Signal) -> Result<AmplitudeSpectrum> {
    let n = sig.len();
    if n < 2 {
        return Err(Error::InvalidInput("spectrum needs at least two samples".into()));
    }
    if sig.samples().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite sample in spectrum input".into()));
    }
    let mut buf: Vec<Complex<f64>> = sig.samples().iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let rate = sig.sample_rate();
    let bins = n / 2 + 1;
    let scale = 2.0 / n as f64;
    Ok(AmplitudeSpectrum {
        frequencies: (0..bins).map(|k| k as f64 * rate / n as f64).collect(),
        amplitudes: buf[..bins].iter().map(|c| scale * c.norm()).collect(),
        n_samples: n,
        sample_rate: rate,
    })
}

/// Linear-interpolation resampling to `target_len` samples at `target_rate`
/// Hz, starting at the signal's first sample.
pub fn resample_for_grid(sig: &Signal, target_rate: f64, target_len: usize) -> Result<Signal> {
    if !(target_rate > 0.0) || target_len < 2 {
        return Err(Error::InvalidConfig(
            "resampling needs a positive rate and length >= 2".into(),
        ));
    }
    let period = 1000.0 / target_rate;
    let needed = (target_len - 1) as f64 * period;
    if sig.span_ms() + 1e-9 < needed {
        return Err(Error::InvalidInput(format!(
            "signal spans {:.1} ms, resampling needs {:.1} ms",
            sig.span_ms(),
            needed
        )));
    }
    let samples = (0..target_len)
        .map(|k| sig.value_at(sig.t0() + k as f64 * period))
        .collect();
    Signal::new(samples, period, sig.t0())
}

/// Restricts to the 1–20 Hz grid and divides by the in-band maximum.
/// Every grid frequency must coincide with a bin of the input.
pub fn normalize_and_band(spec: &AmplitudeSpectrum) -> Result<AmplitudeSpectrum> {
    let grid = band_grid();
    let mut amps = Vec::with_capacity(grid.len());
    let mut cursor = 0;
    for &f in &grid {
        while cursor < spec.frequencies.len() && spec.frequencies[cursor] < f - BIN_TOLERANCE_HZ {
            cursor += 1;
        }
        match spec.frequencies.get(cursor) {
            Some(&g) if (g - f).abs() <= BIN_TOLERANCE_HZ => amps.push(spec.amplitudes[cursor]),
            _ => {
                return Err(Error::GridMismatch(format!(
                    "no spectral bin at {f} Hz; resample to {GRID_LEN} samples at {GRID_RATE_HZ} Hz first"
                )))
            }
        }
    }
    let max = amps.iter().cloned().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(Error::Normalization("all-zero amplitudes in the 1-20 Hz band".into()));
    }
    Ok(AmplitudeSpectrum {
        frequencies: grid,
        amplitudes: amps.iter().map(|a| a / max).collect(),
        n_samples: spec.n_samples,
        sample_rate: spec.sample_rate,
    })
}

/// Resample, transform, band and normalize one detrended lead signal.
pub fn banded_spectrum(sig: &Signal) -> Result<AmplitudeSpectrum> {
    let grid_sig = resample_for_grid(sig, GRID_RATE_HZ, GRID_LEN)?;
    normalize_and_band(&amplitude_spectrum(&grid_sig)?)
}

/// One banded amplitude row per subject, all on the same grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTable {
    pub frequencies: Vec<f64>,
    pub subjects: Vec<String>,
    /// `rows[i]` belongs to `subjects[i]`.
    pub rows: Vec<Vec<f64>>,
    pub label: String,
}

/// Per-frequency cohort summary.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanPoint {
    pub frequency: f64,
    pub mean: f64,
    /// Sample standard deviation; absent for a single subject.
    pub sd: Option<f64>,
}

impl SpectrumTable {
    pub fn new(label: impl Into<String>, frequencies: Vec<f64>) -> Self {
        Self {
            frequencies,
            subjects: Vec::new(),
            rows: Vec::new(),
            label: label.into(),
        }
    }

    pub fn push(&mut self, subject: impl Into<String>, spectrum: &AmplitudeSpectrum) -> Result<()> {
        if !same_grid(&spectrum.frequencies, &self.frequencies) || spectrum.amplitudes.len() != self.frequencies.len() {
            return Err(Error::GridMismatch(format!(
                "subject spectrum grid differs from the {} table grid",
                self.label
            )));
        }
        self.subjects.push(subject.into());
        self.rows.push(spectrum.amplitudes.clone());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Values of every subject at frequency index `bin`.
    pub fn column(&self, bin: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[bin]).collect()
    }

    /// CSV: `freq_hz` then one column per subject.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let mut header = vec!["freq_hz".to_string()];
        header.extend(self.subjects.iter().cloned());
        w.write_record(&header)?;
        for (i, f) in self.frequencies.iter().enumerate() {
            let mut rec = vec![fmt_sig(*f)];
            rec.extend(self.rows.iter().map(|r| fmt_sig(r[i])));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, label: impl Into<String>) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().from_reader(reader);
        let header = r.headers()?.clone();
        if header.get(0) != Some("freq_hz") {
            return Err(Error::InvalidInput(
                "spectrum table must start with a freq_hz column".into(),
            ));
        }
        let subjects: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        if subjects.is_empty() {
            return Err(Error::InvalidInput("spectrum table has no subject columns".into()));
        }
        let mut frequencies = Vec::new();
        let mut rows = vec![Vec::new(); subjects.len()];
        for rec in r.records() {
            let rec = rec?;
            let nums: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidInput(format!("bad number in spectrum table: {e}")))?;
            frequencies.push(nums[0]);
            for (row, v) in rows.iter_mut().zip(&nums[1..]) {
                row.push(*v);
            }
        }
        Ok(Self {
            frequencies,
            subjects,
            rows,
            label: label.into(),
        })
    }

    pub fn read_csv_file(path: impl AsRef<Path>, label: impl Into<String>) -> Result<Self> {
        Self::read_csv(std::io::BufReader::new(std::fs::File::open(path)?), label)
    }
}

pub(crate) fn same_grid(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-6)
}

/// Per-frequency mean and sample standard deviation across subjects.
pub fn mean_spectrum(table: &SpectrumTable) -> Result<Vec<MeanPoint>> {
    if table.is_empty() {
        return Err(Error::InvalidInput(format!("{} table has no subjects", table.label)));
    }
    Ok(table
        .frequencies
        .iter()
        .enumerate()
        .map(|(i, &frequency)| {
            let col = table.column(i);
            MeanPoint {
                frequency,
                mean: crate::stats::mean(&col),
                sd: (col.len() > 1).then(|| crate::stats::sample_sd(&col)),
            }
        })
        .collect())
}

/// CSV `freq_hz,mean,sd`; the sd field is empty when undefined.
pub fn write_mean_csv<W: Write>(points: &[MeanPoint], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(["freq_hz", "mean", "sd"])?;
    for p in points {
        w.write_record([
            fmt_sig(p.frequency),
            fmt_sig(p.mean),
            p.sd.map(fmt_sig).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
