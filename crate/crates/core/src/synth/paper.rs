use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgproc::{BinaryImage, CalibrationSpec, GrayImage};
use crate::signal::Signal;

const MM_PER_INCH: f64 = 25.4;

/// How a strip is printed: paper geometry, grid tone, ink and dirt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PaperRenderSpec {
    pub dpi: u32,
    /// mm/s
    pub paper_speed: f64,
    /// mm/mV
    pub gain: f64,
    /// Gray level of the 1 mm grid; `None` prints no grid.
    pub grid_color_level: Option<f64>,
    /// Fraction of the page covered by stray dark pixels.
    pub speckle_density: f64,
    /// Stroke width in pixels, odd.
    pub line_thickness: usize,
    pub trace_level: f64,
    /// White space above the highest and below the lowest excursion.
    pub margin_mm: f64,
    pub seed: u64,
}

impl Default for PaperRenderSpec {
    fn default() -> Self {
        Self {
            dpi: 600,
            paper_speed: 25.0,
            gain: 10.0,
            grid_color_level: Some(0.75),
            speckle_density: 0.0,
            line_thickness: 5,
            trace_level: 0.05,
            margin_mm: 5.0,
            seed: 0,
        }
    }
}

pub const MAX_SPECKLE_DENSITY: f64 = 0.01;
/// Darkest ink allowed for the trace.
pub const MAX_TRACE_LEVEL: f64 = 0.1;

impl PaperRenderSpec {
    pub fn calibration(&self) -> CalibrationSpec {
        CalibrationSpec {
            paper_speed: self.paper_speed,
            gain: self.gain,
            dpi: self.dpi as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.calibration().validate()?;
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if let Some(g) = self.grid_color_level {
            // the grid has to read as paper once the darkest 5% is taken as ink
            if !(g > 0.5 && g < 1.0) {
                return bad(format!("grid level {g} outside (0.5, 1)"));
            }
        }
        if !(0.0..MAX_SPECKLE_DENSITY).contains(&self.speckle_density) {
            return bad(format!(
                "speckle density {} outside [0, {MAX_SPECKLE_DENSITY})",
                self.speckle_density
            ));
        }
        if self.line_thickness == 0 || self.line_thickness % 2 == 0 {
            return bad(format!("line thickness must be odd, got {}", self.line_thickness));
        }
        if !(0.0..=MAX_TRACE_LEVEL).contains(&self.trace_level) {
            return bad(format!(
                "trace level {} outside [0, {MAX_TRACE_LEVEL}]",
                self.trace_level
            ));
        }
        if !(self.margin_mm >= 0.0 && self.margin_mm.is_finite()) {
            return bad("margin must be non-negative".into());
        }
        Ok(())
    }
}

/// A rendered page with the ground truth of what was drawn where.
#[derive(Debug, Clone, PartialEq)]
pub struct PaperRender {
    pub image: GrayImage,
    /// Black where the trace was inked.
    pub trace: BinaryImage,
    /// Black where speckle was added.
    pub specks: BinaryImage,
    /// Row of 0 mV.
    pub baseline_row: usize,
    /// Trace centre row per column before thickening.
    pub centre_rows: Vec<usize>,
}

pub fn render_paper(sig: &Signal, spec: &PaperRenderSpec) -> Result<GrayImage> {
    render_paper_detailed(sig, spec).map(|r| r.image)
}

/// Column `c` shows time `t0 + c * ms_per_column`; row `baseline - v *
/// rows_per_mv` (rounded) shows `v` mV. Every column gets a vertical run
/// centred on its own row that reaches halfway to its neighbours, so the
/// trace is connected and the median black row of a one-pixel stroke is
/// exactly the centre row. Wider strokes sweep a round pen along it.
pub fn render_paper_detailed(sig: &Signal, spec: &PaperRenderSpec) -> Result<PaperRender> {
    spec.validate()?;
    if sig.samples().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("signal has non-finite samples".into()));
    }
    let cal = spec.calibration();
    let ms_per_col = cal.ms_per_column();
    let rows_per_mv = cal.rows_per_mv();
    let cols = ((sig.span_ms() / ms_per_col).floor() as usize + 1).max(crate::imgproc::MIN_IMAGE_SIDE);
    let values: Vec<f64> = (0..cols)
        .map(|c| sig.value_at(sig.t0() + c as f64 * ms_per_col))
        .collect();
    let offsets: Vec<i64> = values.iter().map(|v| (v * rows_per_mv).round() as i64).collect();
    let hi = offsets.iter().copied().max().unwrap_or(0).max(0);
    let lo = offsets.iter().copied().min().unwrap_or(0).min(0);
    let margin = (spec.margin_mm * spec.dpi as f64 / MM_PER_INCH).ceil() as i64;
    let half = (spec.line_thickness / 2) as i64;
    let pad = margin.max(half + 1);
    let baseline = (pad + hi) as usize;
    let rows = ((pad + hi - lo + pad + 1) as usize).max(crate::imgproc::MIN_IMAGE_SIDE);
    let centre: Vec<usize> = offsets.iter().map(|o| (baseline as i64 - o) as usize).collect();

    let mut page = vec![1.0; rows * cols];
    if let Some(level) = spec.grid_color_level {
        let px_per_mm = spec.dpi as f64 / MM_PER_INCH;
        let mut j = 0.0;
        while j * px_per_mm < cols as f64 {
            let c = (j * px_per_mm).round() as usize;
            if c < cols {
                (0..rows).for_each(|r| page[r * cols + c] = level);
            }
            j += 1.0;
        }
        // horizontal lines run through the baseline in both directions
        for dir in [-1.0, 1.0] {
            let mut j = if dir < 0.0 { 0.0 } else { 1.0 };
            loop {
                let r = baseline as f64 + dir * j * px_per_mm;
                let r = r.round();
                if r < 0.0 || r >= rows as f64 {
                    break;
                }
                let r = r as usize;
                page[r * cols..(r + 1) * cols].fill(level);
                j += 1.0;
            }
        }
    }

    // thin 8-connected polyline, then a round pen of diameter `line_thickness`
    let runs: Vec<(i64, i64)> = (0..cols)
        .map(|c| {
            let r = centre[c] as i64;
            let jump = [c.checked_sub(1), (c + 1 < cols).then_some(c + 1)]
                .into_iter()
                .flatten()
                .map(|n| (centre[n] as i64 - r).abs())
                .max()
                .unwrap_or(0);
            (r - jump / 2, r + jump / 2)
        })
        .collect();
    // wider pens sweep a disk along the exact polyline; rounding the outline
    // from the exact curve keeps its steps even instead of inheriting the
    // jitter of the rounded centre rows
    let exact: Vec<f64> = values.iter().map(|v| baseline as f64 - v * rows_per_mv).collect();
    let span: Vec<(f64, f64)> = (0..cols)
        .map(|c| {
            let y = exact[c];
            let left = c.checked_sub(1).map_or(y, |n| 0.5 * (y + exact[n]));
            let right = exact.get(c + 1).map_or(y, |n| 0.5 * (y + n));
            (y.min(left).min(right), y.max(left).max(right))
        })
        .collect();
    let radius = spec.line_thickness as f64 / 2.0;
    let mut trace = BinaryImage::white(rows, cols, spec.dpi);
    for c in 0..cols as i64 {
        let (top, bottom) = if half == 0 {
            runs[c as usize]
        } else {
            let (mut top, mut bottom) = (f64::INFINITY, f64::NEG_INFINITY);
            for dc in -half..=half {
                let n = c + dc;
                if n < 0 || n >= cols as i64 {
                    continue;
                }
                let gap = (dc.abs() as f64 - 0.5).max(0.0);
                let e = (radius * radius - gap * gap).sqrt();
                top = top.min(span[n as usize].0 - e);
                bottom = bottom.max(span[n as usize].1 + e);
            }
            (top.ceil() as i64, bottom.floor() as i64)
        };
        for r in top.max(0)..=bottom.min(rows as i64 - 1) {
            trace.set(r as usize, c as usize, BinaryImage::BLACK);
        }
    }
    for (px, &t) in page.iter_mut().zip(trace.pixels()) {
        if t == BinaryImage::BLACK {
            *px = spec.trace_level;
        }
    }

    let specks = scatter_specks(&trace, spec);
    for (px, &s) in page.iter_mut().zip(specks.pixels()) {
        if s == BinaryImage::BLACK {
            *px = spec.trace_level;
        }
    }
    Ok(PaperRender {
        image: GrayImage::new(rows, cols, spec.dpi, page)?,
        trace,
        specks,
        baseline_row: baseline,
        centre_rows: centre,
    })
}

/// One- and two-pixel dots, each with a white 8-neighbourhood that keeps it
/// clear of the trace and of other dots.
fn scatter_specks(trace: &BinaryImage, spec: &PaperRenderSpec) -> BinaryImage {
    let (rows, cols) = (trace.rows(), trace.cols());
    let mut specks = BinaryImage::white(rows, cols, spec.dpi);
    let target = (spec.speckle_density * (rows * cols) as f64).round() as usize;
    if target == 0 {
        return specks;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let occupied = |img: &BinaryImage, r: usize, c: usize| img.is_black(r, c);
    let clear = |specks: &BinaryImage, cells: &[(usize, usize)]| {
        cells.iter().all(|&(r, c)| {
            (r.saturating_sub(1)..=(r + 1).min(rows - 1)).all(|rr| {
                (c.saturating_sub(1)..=(c + 1).min(cols - 1))
                    .all(|cc| !occupied(trace, rr, cc) && !occupied(specks, rr, cc))
            })
        })
    };
    let mut placed = 0;
    let mut attempts = 0;
    while placed < target && attempts < 50 * target {
        attempts += 1;
        let r = rng.gen_range(1..rows - 1);
        let c = rng.gen_range(1..cols - 2);
        let pair = target - placed >= 2 && rng.gen_bool(0.5);
        let cells: Vec<(usize, usize)> = if pair {
            if rng.gen_bool(0.5) {
                vec![(r, c), (r, c + 1)]
            } else if r + 1 < rows - 1 {
                vec![(r, c), (r + 1, c)]
            } else {
                vec![(r, c)]
            }
        } else {
            vec![(r, c)]
        };
        if clear(&specks, &cells) {
            for &(r, c) in &cells {
                specks.set(r, c, BinaryImage::BLACK);
            }
            placed += cells.len();
        }
    }
    specks
}
