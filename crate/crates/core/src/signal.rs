//! Uniformly sampled voltage traces and their CSV representation.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// CSV header written and expected for every signal file.
pub const SIGNAL_CSV_HEADER: &str = "t_ms,mv";

/// A uniformly sampled time series in mV, with time in ms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    samples: Vec<f64>,
    sample_period: f64,
    t0: f64,
}

impl Signal {
    pub fn new(samples: Vec<f64>, sample_period: f64, t0: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("signal has no samples".into()));
        }
        if !(sample_period.is_finite() && sample_period > 0.0) {
            return Err(Error::InvalidInput(format!(
                "sample period must be positive, got {sample_period}"
            )));
        }
        if !t0.is_finite() {
            return Err(Error::InvalidInput("start time must be finite".into()));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_period,
            t0,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Milliseconds between consecutive samples.
    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    /// Samples per second.
    pub fn sample_rate(&self) -> f64 {
        1000.0 / self.sample_period
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Time of sample `i` in ms.
    pub fn time_of(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.sample_period
    }

    /// Total time spanned from the first to the last sample, in ms.
    pub fn span_ms(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.sample_period
    }

    /// Same timing, new values. The length must match.
    pub fn with_samples(&self, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != self.samples.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} samples, got {}",
                self.samples.len(),
                samples.len()
            )));
        }
        Signal::new(samples, self.sample_period, self.t0)
    }

    /// Linear interpolation at an arbitrary time; clamps outside the span.
    pub fn value_at(&self, t_ms: f64) -> f64 {
        let pos = (t_ms - self.t0) / self.sample_period;
        let last = self.samples.len() - 1;
        if pos <= 0.0 {
            return self.samples[0];
        }
        if pos >= last as f64 {
            return self.samples[last];
        }
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        self.samples[i] * (1.0 - frac) + self.samples[i + 1] * frac
    }

    /// Sub-range `[start, end)` with the time origin shifted accordingly.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.samples.len() {
            return Err(Error::InvalidInput(format!(
                "slice {start}..{end} out of bounds for {} samples",
                self.samples.len()
            )));
        }
        Signal::new(
            self.samples[start..end].to_vec(),
            self.sample_period,
            self.time_of(start),
        )
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        w.write_record(["t_ms", "mv"])?;
        for (i, v) in self.samples.iter().enumerate() {
            w.write_record([fmt_sig(self.time_of(i)), fmt_sig(*v)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t_ms", "mv"] {
            return Err(Error::InvalidInput(format!(
                "expected header `{SIGNAL_CSV_HEADER}`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let parse = |idx: usize| -> Result<f64> {
                rec.get(idx)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::InvalidInput(format!("bad number on data row {}", line + 1)))
            };
            times.push(parse(0)?);
            values.push(parse(1)?);
        }
        if times.len() < 2 {
            return Err(Error::InvalidInput(
                "signal CSV needs at least two rows to infer the sample period".into(),
            ));
        }
        let period = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        Signal::new(values, period, times[0])
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn read_csv_file(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Signal::read_csv(std::io::BufReader::new(f))
    }
}

/// Formats with 9 significant digits, the documented CSV precision.
pub fn fmt_sig(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let digits = 9i32;
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (digits - 1 - magnitude).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').trim_end_matches('.');
        if trimmed == "-0" {
            "0".into()
        } else {
            trimmed.to_string()
        }
    } else {
        s
    }
}
