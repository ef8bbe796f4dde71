//! Benchmarks live in `benches/`; this crate only hosts their fixtures.

use ecgkit::imgproc::GrayImage;
use ecgkit::synth::{generate_ecg, patient_params, render_paper, PaperRenderSpec};
use ecgkit::Signal;

/// Ten seconds of a drawn normal patient.
pub fn strip_signal(seed: u64) -> Signal {
    generate_ecg(&patient_params(false, seed), 10.0)
        .expect("valid draw")
        .signal
}

/// The same strip printed on speckled paper.
pub fn strip_page(seed: u64) -> GrayImage {
    let spec = PaperRenderSpec {
        speckle_density: 0.002,
        seed,
        ..Default::default()
    };
    render_paper(&strip_signal(seed), &spec).expect("valid spec")
}
