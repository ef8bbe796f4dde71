//! Ground-truth generator: parametric two-class ECG strips, a renderer that
//! prints them onto gridded, speckled paper, and a desk-scale dataset built
//! by pushing those pages back through the digitizer.

mod dataset;
mod ecg;
mod paper;

pub use dataset::{
    make_dataset, patient_params, read_manifest, synthesize_patient, write_manifest, Dataset, DatasetOptions,
    ManifestRecord, SyntheticPatient, MANIFEST_FILE,
};
pub use ecg::{
    beat_value, generate_ecg, BeatLandmarks, Drift, EcgParams, EpsilonWave, SyntheticEcg, WaveAmplitudes, WaveOffsets,
    WaveWidths, MAX_EPSILON_MV,
};
pub use paper::{
    render_paper, render_paper_detailed, PaperRender, PaperRenderSpec, MAX_SPECKLE_DENSITY, MAX_TRACE_LEVEL,
};
