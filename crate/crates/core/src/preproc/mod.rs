//! Lead-signal conditioning and beat extraction.

mod beats;
mod detrend;
mod peaks;
mod savgol;

pub use beats::{
    augment, augment_beat, render_beat_image, segment_beats, Beat, BeatImage, BEAT_IMAGE_SIZE, DEFAULT_BEAT_WINDOW_MS,
    RENDER_MV_RANGE,
};
pub use detrend::{detrend_median, DetrendConfig};
pub use peaks::{detect_r_peaks, REFRACTORY_MS};
pub use savgol::{savgol_smooth, SmoothConfig};

/// Mirror index into `0..n` without repeating the edge sample
/// (`-1 -> 1`, `n -> n - 2`), folding as many times as needed.
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::reflect_index;

    #[test]
    fn reflection_mirrors_about_endpoints() {
        let n = 5;
        let got: Vec<usize> = (-6..11).map(|i| reflect_index(i, n)).collect();
        assert_eq!(got, vec![2, 3, 4, 3, 2, 1, 0, 1, 2, 3, 4, 3, 2, 1, 0, 1, 2]);
        assert_eq!(reflect_index(-3, 1), 0);
    }
}
