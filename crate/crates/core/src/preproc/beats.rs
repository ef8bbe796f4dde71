use std::path::Path;

use image::{GrayImage as PngGray, Luma};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::signal::Signal;

/// Side length of a rendered beat raster.
pub const BEAT_IMAGE_SIZE: usize = 138;
/// Beats are cut symmetrically around the R peak over this span.
pub const DEFAULT_BEAT_WINDOW_MS: f64 = 700.0;
/// Rendered voltage window is `[-RENDER_MV_RANGE, +RENDER_MV_RANGE]`.
pub const RENDER_MV_RANGE: f64 = 2.0;

const MAX_SHIFT_PX: i32 = 4;
const SCALE_RANGE: (f64, f64) = (0.95, 1.05);
const NOISE_MAX: f64 = 0.05;

/// One heartbeat cut from a lead signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Beat {
    pub samples: Signal,
    /// Position of the R peak inside `samples`.
    pub r_index: usize,
}

/// Fixed-size single-channel beat raster, white background, black trace.
#[derive(Debug, Clone, PartialEq)]
pub struct BeatImage {
    pixels: Vec<f64>,
}

impl BeatImage {
    pub fn new(pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != BEAT_IMAGE_SIZE * BEAT_IMAGE_SIZE {
            return Err(Error::InvalidInput(format!(
                "beat image needs {} pixels, got {}",
                BEAT_IMAGE_SIZE * BEAT_IMAGE_SIZE,
                pixels.len()
            )));
        }
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidInput("beat pixels must lie in [0, 1]".into()));
        }
        Ok(Self { pixels })
    }

    pub fn blank() -> Self {
        Self {
            pixels: vec![1.0; BEAT_IMAGE_SIZE * BEAT_IMAGE_SIZE],
        }
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * BEAT_IMAGE_SIZE + col]
    }

    fn set(&mut self, row: usize, col: usize, v: f64) {
        self.pixels[row * BEAT_IMAGE_SIZE + col] = v;
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let n = BEAT_IMAGE_SIZE as u32;
        PngGray::from_fn(n, n, |x, y| {
            Luma([(self.get(y as usize, x as usize) * 255.0).round() as u8])
        })
        .save(path)?;
        Ok(())
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path)?.to_luma8();
        if img.width() as usize != BEAT_IMAGE_SIZE || img.height() as usize != BEAT_IMAGE_SIZE {
            return Err(Error::InvalidInput(format!(
                "beat image must be {BEAT_IMAGE_SIZE}x{BEAT_IMAGE_SIZE}, got {}x{}",
                img.width(),
                img.height()
            )));
        }
        Self::new(img.pixels().map(|p| p.0[0] as f64 / 255.0).collect())
    }
}

/// Cuts a fixed window centered on each peak. Peaks whose window would
/// cross either end of the signal are dropped.
pub fn segment_beats(sig: &Signal, peaks: &[usize], window_ms: f64) -> Vec<Beat> {
    let len = (window_ms / sig.sample_period()).round() as usize;
    if len == 0 || len > sig.len() {
        return Vec::new();
    }
    let half = len / 2;
    peaks
        .iter()
        .filter(|&&p| p >= half && p - half + len <= sig.len())
        .filter_map(|&p| {
            let start = p - half;
            sig.slice(start, start + len).ok().map(|samples| Beat {
                samples,
                r_index: p - start,
            })
        })
        .collect()
}

fn mv_to_row(v: f64) -> f64 {
    let last = (BEAT_IMAGE_SIZE - 1) as f64;
    (RENDER_MV_RANGE - v.clamp(-RENDER_MV_RANGE, RENDER_MV_RANGE)) / (2.0 * RENDER_MV_RANGE) * last
}

/// Row back to mV under the fixed render geometry.
#[cfg(test)]
fn row_to_mv(row: f64) -> f64 {
    let last = (BEAT_IMAGE_SIZE - 1) as f64;
    RENDER_MV_RANGE - row / last * 2.0 * RENDER_MV_RANGE
}

fn draw_line(img: &mut BeatImage, (r0, c0): (i64, i64), (r1, c1): (i64, i64)) {
    let (dr, dc) = ((r1 - r0).abs(), (c1 - c0).abs());
    let (sr, sc) = (if r1 >= r0 { 1 } else { -1 }, if c1 >= c0 { 1 } else { -1 });
    let (mut r, mut c) = (r0, c0);
    let mut err = dc - dr;
    let n = BEAT_IMAGE_SIZE as i64;
    loop {
        if (0..n).contains(&r) && (0..n).contains(&c) {
            img.set(r as usize, c as usize, 0.0);
        }
        if r == r1 && c == c1 {
            break;
        }
        let e2 = 2 * err;
        if e2 > -dr {
            err -= dr;
            c += sc;
        }
        if e2 < dc {
            err += dc;
            r += sr;
        }
    }
}

fn render_scaled(beat: &Beat, amplitude: f64) -> BeatImage {
    let mut img = BeatImage::blank();
    let x = beat.samples.samples();
    let last = (BEAT_IMAGE_SIZE - 1) as f64;
    let denom = (x.len().max(2) - 1) as f64;
    let point = |i: usize| -> (i64, i64) {
        let col = if x.len() == 1 { 0.0 } else { i as f64 * last / denom };
        (mv_to_row(x[i] * amplitude).round() as i64, col.round() as i64)
    };
    let mut prev = point(0);
    draw_line(&mut img, prev, prev);
    for i in 1..x.len() {
        let next = point(i);
        draw_line(&mut img, prev, next);
        prev = next;
    }
    img
}

/// Plots the beat as a one-pixel polyline: the window spans all columns and
/// `[-2, +2]` mV spans all rows (values outside are clipped).
pub fn render_beat_image(beat: &Beat) -> BeatImage {
    render_scaled(beat, 1.0)
}

fn shifted(img: &BeatImage, dx: i32, dy: i32, scale: f64) -> BeatImage {
    let n = BEAT_IMAGE_SIZE as i64;
    let center = (n - 1) as f64 / 2.0;
    let mut out = BeatImage::blank();
    for r in 0..n {
        // source rows covered by this output row under the vertical scale
        let lo = center + ((r - dy as i64) as f64 - 0.5 - center) / scale;
        let hi = center + ((r - dy as i64) as f64 + 0.5 - center) / scale;
        let (r_lo, r_hi) = ((lo + 0.5).floor() as i64, (hi - 0.5).ceil() as i64);
        for c in 0..n {
            let sc = c - dx as i64;
            if !(0..n).contains(&sc) {
                continue;
            }
            let mut v: f64 = 1.0;
            for sr in r_lo.max(0)..=r_hi.min(n - 1) {
                v = v.min(img.get(sr as usize, sc as usize));
            }
            out.set(r as usize, c as usize, v);
        }
    }
    out
}

fn add_noise(img: &mut BeatImage, rng: &mut ChaCha8Rng) {
    for p in img.pixels.iter_mut() {
        let u: f64 = rng.gen_range(0.0..NOISE_MAX);
        // push toward the opposite tone so values stay in [0, 1]
        *p += u * (1.0 - 2.0 * *p);
    }
}

struct Distortion {
    dx: i32,
    dy: i32,
    scale: f64,
}

fn draw_distortion(rng: &mut ChaCha8Rng) -> Distortion {
    Distortion {
        dx: rng.gen_range(-MAX_SHIFT_PX..=MAX_SHIFT_PX),
        dy: rng.gen_range(-MAX_SHIFT_PX..=MAX_SHIFT_PX),
        scale: rng.gen_range(SCALE_RANGE.0..=SCALE_RANGE.1),
    }
}

/// `n` slightly distorted copies of a rendered beat: shifts of up to four
/// pixels each way, a vertical scale in `[0.95, 1.05]` resampled in pixel
/// space, and uniform pixel noise below 0.05. Deterministic in `seed`.
pub fn augment(img: &BeatImage, seed: u64, n: usize) -> Vec<BeatImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let d = draw_distortion(&mut rng);
            let mut out = shifted(img, d.dx, d.dy, d.scale);
            add_noise(&mut out, &mut rng);
            out
        })
        .collect()
}

/// Like [`augment`], but the amplitude scale is applied to the samples
/// before rendering.
pub fn augment_beat(beat: &Beat, seed: u64, n: usize) -> Vec<BeatImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let d = draw_distortion(&mut rng);
            let rendered = render_scaled(beat, d.scale);
            let mut out = shifted(&rendered, d.dx, d.dy, 1.0);
            add_noise(&mut out, &mut rng);
            out
        })
        .collect()
}
