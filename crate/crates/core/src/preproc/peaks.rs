use crate::imgproc::percentile_threshold;
use crate::signal::Signal;

/// Minimum spacing between accepted peaks.
pub const REFRACTORY_MS: f64 = 200.0;

const THRESHOLD_FRACTION: f64 = 0.6;
const REFERENCE_QUANTILE: f64 = 0.98;

/// R-peak candidates: local maxima of `|sig|` above 0.6 times the 98th
/// percentile of `|sig|`. Candidates are accepted strongest first and any
/// candidate within the refractory gap of an accepted one is discarded.
/// Indices come back in ascending order.
pub fn detect_r_peaks(sig: &Signal) -> Vec<usize> {
    let gap = (REFRACTORY_MS / sig.sample_period()).ceil() as usize;
    let n = sig.len();
    if n < gap.max(3) {
        return Vec::new();
    }
    let mag: Vec<f64> = sig.samples().iter().map(|v| v.abs()).collect();
    let reference = match percentile_threshold(&mag, REFERENCE_QUANTILE) {
        Ok(r) => r,
        Err(_) => return Vec::new(),
    };
    let threshold = THRESHOLD_FRACTION * reference;
    let mut candidates: Vec<usize> = (0..n)
        .filter(|&i| {
            let a = mag[i];
            a > threshold && a > 0.0 && (i == 0 || a >= mag[i - 1]) && (i + 1 == n || a > mag[i + 1])
        })
        .collect();
    candidates.sort_by(|&a, &b| mag[b].total_cmp(&mag[a]).then(a.cmp(&b)));
    let mut accepted: Vec<usize> = Vec::new();
    for c in candidates {
        if accepted.iter().all(|&p| p.abs_diff(c) >= gap) {
            accepted.push(c);
        }
    }
    accepted.sort_unstable();
    accepted
}
