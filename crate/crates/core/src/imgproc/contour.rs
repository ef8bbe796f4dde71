use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::BinaryImage;
use crate::error::{Error, Result};
use crate::signal::Signal;

const MM_PER_INCH: f64 = 25.4;

/// Paper geometry used to turn pixel coordinates into time and voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSpec {
    /// mm/s
    pub paper_speed: f64,
    /// mm/mV
    pub gain: f64,
    pub dpi: f64,
}

impl Default for CalibrationSpec {
    fn default() -> Self {
        Self {
            paper_speed: 25.0,
            gain: 10.0,
            dpi: 600.0,
        }
    }
}

impl CalibrationSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("paper_speed", self.paper_speed),
            ("gain", self.gain),
            ("dpi", self.dpi),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Milliseconds represented by one pixel column.
    pub fn ms_per_column(&self) -> f64 {
        MM_PER_INCH / (self.dpi * self.paper_speed) * 1000.0
    }

    /// Millivolts represented by one pixel row.
    pub fn mv_per_row(&self) -> f64 {
        MM_PER_INCH / (self.dpi * self.gain)
    }

    pub fn rows_per_mv(&self) -> f64 {
        1.0 / self.mv_per_row()
    }
}

/// Per-column trace row (`None` where the column has no black pixel).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contour {
    rows: Vec<Option<usize>>,
}

impl Contour {
    pub fn new(rows: Vec<Option<usize>>) -> Self {
        Self { rows }
    }

    pub fn rows(&self) -> &[Option<usize>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn absent_count(&self) -> usize {
        self.rows.iter().filter(|r| r.is_none()).count()
    }

    /// `(column, row)` pairs in column order.
    pub fn points(&self) -> impl Iterator<Item = (usize, Option<usize>)> + '_ {
        self.rows.iter().copied().enumerate()
    }
}

/// Middle black pixel of every column: the lower median of the black rows.
pub fn extract_contour(bw: &BinaryImage) -> Contour {
    let (rows, cols) = (bw.rows(), bw.cols());
    let mut per_col: Vec<Vec<usize>> = vec![Vec::new(); cols];
    for r in 0..rows {
        for (c, col_rows) in per_col.iter_mut().enumerate() {
            if bw.is_black(r, c) {
                col_rows.push(r);
            }
        }
    }
    Contour::new(
        per_col
            .into_iter()
            .map(|black| (!black.is_empty()).then(|| black[(black.len() - 1) / 2]))
            .collect(),
    )
}

/// Most frequent contour row; smallest row wins ties.
pub fn modal_row(contour: &Contour) -> Option<usize> {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for r in contour.rows().iter().flatten() {
        *counts.entry(*r).or_default() += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(row, _)| row)
}

/// Converts a contour into a voltage trace. Gaps are linearly interpolated
/// and held flat past the first and last traced columns.
pub fn calibrate(contour: &Contour, cal: &CalibrationSpec, baseline_row: f64) -> Result<Signal> {
    cal.validate()?;
    let known: Vec<(usize, f64)> = contour.points().filter_map(|(c, r)| r.map(|r| (c, r as f64))).collect();
    if known.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mut filled = vec![0.0; contour.len()];
    let (first_col, first_row) = known[0];
    let (last_col, last_row) = known[known.len() - 1];
    filled[..=first_col].fill(first_row);
    filled[last_col..].fill(last_row);
    for pair in known.windows(2) {
        let ((c0, r0), (c1, r1)) = (pair[0], pair[1]);
        for (c, slot) in filled.iter_mut().enumerate().take(c1 + 1).skip(c0) {
            let t = (c - c0) as f64 / (c1 - c0) as f64;
            *slot = r0 + (r1 - r0) * t;
        }
    }
    let mv_per_row = cal.mv_per_row();
    let samples = filled.iter().map(|r| (baseline_row - r) * mv_per_row).collect();
    Signal::new(samples, cal.ms_per_column(), 0.0)
}
