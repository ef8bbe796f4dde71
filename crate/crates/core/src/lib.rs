//! Paper-ECG toolkit: digitize scanned lead strips, cut and classify
//! heartbeats with a small convolutional network, turn beat-level verdicts
//! into a patient-level posterior, and compare cohorts by their amplitude
//! spectra.

pub mod bayes;
pub mod cnn;
pub mod error;
pub mod imgproc;
pub mod preproc;
pub mod signal;
pub mod spectral;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use signal::Signal;
