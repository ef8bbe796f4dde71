//! Scanned-strip digitization: thresholding, despeckling, contour tracing
//! and conversion of pixel rows into a calibrated voltage trace.
//!
//! Images are row-major with row 0 at the top of the page. Gray values run
//! from 0 (black) to 1 (white); binary images use the same polarity.

mod binarize;
mod contour;
mod despeckle;

use std::path::Path;

use image::{DynamicImage, GrayImage as PngGray, Luma};

use crate::error::{Error, Result};

pub use crate::signal::Signal;
pub use binarize::{binarize_ink, binarize_percentile, percentile_threshold};
pub use contour::{calibrate, extract_contour, modal_row, CalibrationSpec, Contour};
pub use despeckle::{despeckle, DespeckleFilter};

/// Smallest side length the default despeckle support needs.
pub const MIN_IMAGE_SIDE: usize = 5;

/// Grayscale page with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    rows: usize,
    cols: usize,
    dpi: u32,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(rows: usize, cols: usize, dpi: u32, pixels: Vec<f64>) -> Result<Self> {
        if rows < MIN_IMAGE_SIDE || cols < MIN_IMAGE_SIDE {
            return Err(Error::InvalidInput(format!(
                "image must be at least {MIN_IMAGE_SIDE}x{MIN_IMAGE_SIDE}, got {rows}x{cols}"
            )));
        }
        if dpi == 0 {
            return Err(Error::InvalidInput("dpi must be positive".into()));
        }
        if pixels.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "expected {} pixels, got {}",
                rows * cols,
                pixels.len()
            )));
        }
        if let Some(p) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidInput(format!("pixel value {p} outside [0, 1]")));
        }
        Ok(Self {
            rows,
            cols,
            dpi,
            pixels,
        })
    }

    /// A uniform page.
    pub fn filled(rows: usize, cols: usize, dpi: u32, value: f64) -> Result<Self> {
        Self::new(rows, cols, dpi, vec![value; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dpi(&self) -> u32 {
        self.dpi
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.cols + col]
    }

    /// Sets a pixel, clamping into `[0, 1]`.
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.pixels[row * self.cols + col] = value.clamp(0.0, 1.0);
    }

    /// `1 - p` for every pixel; dark ink becomes high values.
    pub fn inverted(&self) -> GrayImage {
        GrayImage {
            rows: self.rows,
            cols: self.cols,
            dpi: self.dpi,
            pixels: self.pixels.iter().map(|p| 1.0 - p).collect(),
        }
    }

    /// Loads an 8-bit grayscale or RGB(A) raster. Color is reduced with
    /// Rec. 709 luma weights.
    pub fn load_png(path: impl AsRef<Path>, dpi: u32) -> Result<Self> {
        let img = image::open(path)?;
        Self::from_dynamic(&img, dpi)
    }

    pub fn from_dynamic(img: &DynamicImage, dpi: u32) -> Result<Self> {
        let (cols, rows) = (img.width() as usize, img.height() as usize);
        let pixels = match img {
            DynamicImage::ImageLuma8(g) => g.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
            _ => img
                .to_rgb8()
                .pixels()
                .map(|p| {
                    let [r, g, b] = p.0;
                    (0.2126 * r as f64 + 0.7152 * g as f64 + 0.0722 * b as f64) / 255.0
                })
                .collect::<Vec<_>>(),
        };
        let pixels = pixels.into_iter().map(|p: f64| p.clamp(0.0, 1.0)).collect();
        Self::new(rows, cols, dpi, pixels)
    }

    pub fn to_png(&self) -> PngGray {
        PngGray::from_fn(self.cols as u32, self.rows as u32, |x, y| {
            Luma([(self.get(y as usize, x as usize) * 255.0).round() as u8])
        })
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_png().save(path)?;
        Ok(())
    }
}

/// Black (0) and white (1) page.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    rows: usize,
    cols: usize,
    dpi: u32,
    pixels: Vec<u8>,
}

impl BinaryImage {
    pub const BLACK: u8 = 0;
    pub const WHITE: u8 = 1;

    pub fn new(rows: usize, cols: usize, dpi: u32, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "expected {} pixels, got {}",
                rows * cols,
                pixels.len()
            )));
        }
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput("empty binary image".into()));
        }
        if pixels.iter().any(|&p| p > 1) {
            return Err(Error::InvalidInput("binary pixels must be 0 or 1".into()));
        }
        Ok(Self {
            rows,
            cols,
            dpi,
            pixels,
        })
    }

    pub fn white(rows: usize, cols: usize, dpi: u32) -> Self {
        Self {
            rows,
            cols,
            dpi,
            pixels: vec![Self::WHITE; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dpi(&self) -> u32 {
        self.dpi
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.cols + col]
    }

    pub fn is_black(&self, row: usize, col: usize) -> bool {
        self.get(row, col) == Self::BLACK
    }

    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        debug_assert!(value <= 1);
        self.pixels[row * self.cols + col] = value;
    }

    pub fn black_count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p == Self::BLACK).count()
    }

    /// Grayscale view with the same values, for feeding back into thresholding.
    pub fn to_gray(&self) -> Result<GrayImage> {
        GrayImage::new(
            self.rows,
            self.cols,
            self.dpi,
            self.pixels.iter().map(|&p| p as f64).collect(),
        )
    }
}

/// Settings for the full strip digitizer.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DigitizeConfig {
    pub percentile: f64,
    pub filter: DespeckleFilter,
    pub calibration: CalibrationSpec,
}

impl Default for DigitizeConfig {
    fn default() -> Self {
        Self {
            percentile: 0.95,
            filter: DespeckleFilter::default(),
            calibration: CalibrationSpec::default(),
        }
    }
}

/// Diagnostics from one digitizer run.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DigitizeReport {
    /// Darkness quantile used for ink extraction.
    pub threshold: f64,
    pub black_after_threshold: usize,
    pub flipped_pixels: usize,
    pub absent_columns: usize,
    pub baseline_row: usize,
}

/// Threshold, despeckle, trace and calibrate one pre-cropped lead strip.
/// The baseline is the modal contour row.
pub fn digitize(img: &GrayImage, cfg: &DigitizeConfig) -> Result<(Signal, DigitizeReport)> {
    let (bw, threshold) = binarize_ink(img, cfg.percentile)?;
    let clean = despeckle(&bw, &cfg.filter)?;
    let contour = extract_contour(&clean);
    let baseline_row = modal_row(&contour).ok_or(Error::EmptyTrace)?;
    let signal = calibrate(&contour, &cfg.calibration, baseline_row as f64)?;
    let black_before = bw.black_count();
    let report = DigitizeReport {
        threshold,
        black_after_threshold: black_before,
        flipped_pixels: black_before - clean.black_count(),
        absent_columns: contour.absent_count(),
        baseline_row,
    };
    Ok((signal, report))
}
