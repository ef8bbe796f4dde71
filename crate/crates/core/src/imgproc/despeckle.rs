use serde::{Deserialize, Serialize};

use super::BinaryImage;
use crate::error::{Error, Result};

/// Weighted neighborhood test that turns stray black pixels white.
///
/// A black pixel is flipped when the weighted share of white pixels among
/// its `k*k - 1` neighbors exceeds `c`. With `k = 5` the outer ring (16
/// pixels) carries `outer_weight_total` and the inner ring (8 pixels)
/// `inner_weight_total`, spread evenly inside each ring. Any other odd `k`
/// weights every neighbor equally.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DespeckleFilter {
    pub k: usize,
    pub c: f64,
    pub outer_weight_total: f64,
    pub inner_weight_total: f64,
}

impl Default for DespeckleFilter {
    fn default() -> Self {
        Self {
            k: 5,
            c: 0.5,
            outer_weight_total: 0.6,
            inner_weight_total: 0.4,
        }
    }
}

impl DespeckleFilter {
    pub fn new(k: usize, c: f64) -> Result<Self> {
        let f = Self {
            k,
            c,
            ..Self::default()
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 3 || self.k % 2 == 0 {
            return Err(Error::InvalidFilter(format!(
                "extent must be odd and at least 3, got {}",
                self.k
            )));
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(Error::InvalidFilter(format!(
                "threshold must lie in (0, 1), got {}",
                self.c
            )));
        }
        if self.outer_weight_total < 0.0
            || self.inner_weight_total < 0.0
            || (self.outer_weight_total + self.inner_weight_total - 1.0).abs() > 1e-12
        {
            return Err(Error::InvalidFilter(
                "ring weights must be non-negative and sum to 1".into(),
            ));
        }
        Ok(())
    }

    /// Neighbor offsets with their weights; the weights sum to one.
    pub fn neighbor_weights(&self) -> Vec<(isize, isize, f64)> {
        let h = (self.k / 2) as isize;
        let uniform = 1.0 / (self.k * self.k - 1) as f64;
        let mut out = Vec::with_capacity(self.k * self.k - 1);
        for dr in -h..=h {
            for dc in -h..=h {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let w = if self.k == 5 {
                    if dr.abs().max(dc.abs()) == 2 {
                        self.outer_weight_total / 16.0
                    } else {
                        self.inner_weight_total / 8.0
                    }
                } else {
                    uniform
                };
                out.push((dr, dc, w));
            }
        }
        out
    }
}

/// Ring weights like `0.6 / 16` are inexact in binary, so a share that
/// should equal `c` exactly can land an ulp above it.
const TIE_TOLERANCE: f64 = 1e-12;

/// Single pass over the input: every decision reads the original image, so
/// flips never cascade. Border bands of width `k / 2` are forced white and
/// white pixels are never turned black.
pub fn despeckle(bw: &BinaryImage, filter: &DespeckleFilter) -> Result<BinaryImage> {
    filter.validate()?;
    let (rows, cols) = (bw.rows(), bw.cols());
    if filter.k > rows.min(cols) {
        return Err(Error::InvalidFilter(format!(
            "extent {} exceeds image side {}",
            filter.k,
            rows.min(cols)
        )));
    }
    let h = filter.k / 2;
    let weights = filter.neighbor_weights();
    let src = bw.pixels();
    let mut out = BinaryImage::white(rows, cols, bw.dpi());
    for r in h..rows - h {
        for c in h..cols - h {
            let idx = r * cols + c;
            if src[idx] == BinaryImage::WHITE {
                continue;
            }
            let white_share: f64 = weights
                .iter()
                .map(|&(dr, dc, w)| {
                    let rr = (r as isize + dr) as usize;
                    let cc = (c as isize + dc) as usize;
                    w * src[rr * cols + cc] as f64
                })
                .sum();
            if white_share <= filter.c + TIE_TOLERANCE {
                out.set(r, c, BinaryImage::BLACK);
            }
        }
    }
    Ok(out)
}
