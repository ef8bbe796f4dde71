use super::{BinaryImage, GrayImage};
use crate::error::{Error, Result};

/// Empirical `p`-quantile without interpolation: the smallest value `x` with
/// `F(x-) <= p <= F(x)` under the empirical CDF of `values`.
pub fn percentile_threshold(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidInput("no pixels to threshold".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidInput(format!("percentile must lie in (0, 1), got {p}")));
    }
    let n = values.len();
    // smallest rank r (1-based) with r / n >= p
    let mut rank = (p * n as f64).ceil().max(1.0) as usize;
    if rank > 1 && (rank - 1) as f64 / n as f64 >= p {
        rank -= 1;
    }
    let rank = rank.min(n);
    let mut scratch = values.to_vec();
    let (_, kth, _) = scratch.select_nth_unstable_by(rank - 1, |a, b| a.total_cmp(b));
    Ok(*kth)
}

/// Pixels strictly brighter than the `p`-quantile become white, the rest black.
pub fn binarize_percentile(img: &GrayImage, p: f64) -> Result<BinaryImage> {
    let threshold = percentile_threshold(img.pixels(), p)?;
    let pixels = img
        .pixels()
        .iter()
        .map(|&g| {
            if g > threshold {
                BinaryImage::WHITE
            } else {
                BinaryImage::BLACK
            }
        })
        .collect();
    BinaryImage::new(img.rows(), img.cols(), img.dpi(), pixels)
}

/// Ink extraction used by the digitizer: the percentile rule applied to
/// darkness (`1 - gray`). A pixel is black iff its darkness strictly exceeds
/// the `p`-quantile of darkness, so only the darkest `1 - p` tail survives
/// and ties at the quantile (a uniform grid tone) stay white.
///
/// Returns the binary image and the threshold in darkness units.
pub fn binarize_ink(img: &GrayImage, p: f64) -> Result<(BinaryImage, f64)> {
    let darkness = img.inverted();
    let threshold = percentile_threshold(darkness.pixels(), p)?;
    let dark = binarize_percentile(&darkness, p)?;
    let pixels = dark
        .pixels()
        .iter()
        .map(|&d| {
            if d == BinaryImage::WHITE {
                BinaryImage::BLACK
            } else {
                BinaryImage::WHITE
            }
        })
        .collect();
    Ok((BinaryImage::new(img.rows(), img.cols(), img.dpi(), pixels)?, threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn image_from_rows(rows: &[&[f64]]) -> GrayImage {
        let cols = rows[0].len();
        let pixels = rows.iter().flat_map(|r| r.iter().copied()).collect();
        GrayImage::new(rows.len(), cols, 600, pixels).unwrap()
    }

    #[test]
    fn five_value_row_thresholds_at_its_maximum() {
        let row = [0.1, 0.97, 0.98, 0.99, 1.0];
        assert_eq!(percentile_threshold(&row, 0.95).unwrap(), 1.0);
        // nothing is strictly above the maximum
        let img = image_from_rows(&vec![&row[..]; 5]);
        assert_eq!(binarize_percentile(&img, 0.95).unwrap().black_count(), 25);
        // at p = 0.8 the quantile drops to 0.99 and only the 1.0 column is white
        let bw = binarize_percentile(&img, 0.8).unwrap();
        for r in 0..5 {
            for c in 0..4 {
                assert!(bw.is_black(r, c));
            }
            assert!(!bw.is_black(r, 4));
        }
    }

    #[test]
    fn constant_image_is_all_black() {
        let img = GrayImage::filled(6, 7, 600, 0.5).unwrap();
        let bw = binarize_percentile(&img, 0.95).unwrap();
        assert_eq!(bw.black_count(), 42);
    }

    #[test]
    fn checkerboard_is_all_black() {
        let pixels = (0..36).map(|i| ((i / 6 + i % 6) % 2) as f64).collect();
        let img = GrayImage::new(6, 6, 600, pixels).unwrap();
        assert_eq!(percentile_threshold(img.pixels(), 0.95).unwrap(), 1.0);
        assert_eq!(binarize_percentile(&img, 0.95).unwrap().black_count(), 36);
    }

    #[test]
    fn threshold_rank_is_exact_at_boundaries() {
        let v: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        // F(95) = 0.95 exactly, so 95 is the quantile despite float rounding in p * n.
        assert_eq!(percentile_threshold(&v, 0.95).unwrap(), 95.0);
        assert_eq!(percentile_threshold(&v, 0.951).unwrap(), 96.0);
        assert_eq!(percentile_threshold(&v, 0.001).unwrap(), 1.0);
    }

    #[test]
    fn rejects_bad_percentile() {
        assert!(percentile_threshold(&[1.0], 0.0).is_err());
        assert!(percentile_threshold(&[1.0], 1.0).is_err());
        assert!(percentile_threshold(&[], 0.5).is_err());
    }

    #[test]
    fn ink_extraction_ignores_uniform_grid_tone() {
        // white page, light grid every 4th row/col, dark trace on row 10
        let (rows, cols) = (20, 40);
        let mut img = GrayImage::filled(rows, cols, 600, 1.0).unwrap();
        for r in 0..rows {
            for c in 0..cols {
                if r % 4 == 0 || c % 4 == 0 {
                    img.set(r, c, 0.75);
                }
            }
        }
        for c in 0..cols {
            img.set(10, c, 0.05);
        }
        let (bw, _) = binarize_ink(&img, 0.95).unwrap();
        for r in 0..rows {
            for c in 0..cols {
                assert_eq!(bw.is_black(r, c), r == 10, "pixel ({r},{c})");
            }
        }
    }

    proptest! {
        // A {0,1} image thresholds to itself whenever the quantile lands on
        // the lower value: literal rule needs black share >= p, ink rule
        // needs white share >= p.
        #[test]
        fn binary_images_are_fixed_points(
            bits in proptest::collection::vec(prop::bool::weighted(0.97), 100),
        ) {
            let px: Vec<u8> = bits.iter().map(|&b| b as u8).collect();
            let bw = BinaryImage::new(10, 10, 600, px).unwrap();
            let gray = bw.to_gray().unwrap();
            let white_share = (100 - bw.black_count()) as f64 / 100.0;
            if white_share >= 0.95 && bw.black_count() > 0 {
                let (again, _) = binarize_ink(&gray, 0.95).unwrap();
                prop_assert_eq!(&again, &bw);
            }
            let flipped: Vec<u8> = bw.pixels().iter().map(|p| 1 - p).collect();
            let inv = BinaryImage::new(10, 10, 600, flipped).unwrap();
            if inv.black_count() as f64 / 100.0 >= 0.95 && inv.black_count() < 100 {
                let again = binarize_percentile(&inv.to_gray().unwrap(), 0.95).unwrap();
                prop_assert_eq!(&again, &inv);
            }
        }
    }
}
