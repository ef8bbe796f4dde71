use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ecg::{generate_ecg, BeatLandmarks, EcgParams, SyntheticEcg};
use super::paper::{render_paper, PaperRenderSpec};
use crate::cnn::LabeledBeat;
use crate::error::{Error, Result};
use crate::imgproc::{digitize, DigitizeConfig};
use crate::preproc::{
    detect_r_peaks, detrend_median, render_beat_image, segment_beats, Beat, DetrendConfig, DEFAULT_BEAT_WINDOW_MS,
};
use crate::signal::Signal;

/// Knobs shared by every synthetic patient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetOptions {
    pub duration_s: f64,
    pub window_ms: f64,
    /// Page template; the seed is replaced per patient.
    pub render: PaperRenderSpec,
    /// Upper end of the per-patient speckle density draw.
    pub max_speckle_density: f64,
    pub digitize: DigitizeConfig,
    pub detrend: DetrendConfig,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        Self {
            duration_s: 10.0,
            window_ms: DEFAULT_BEAT_WINDOW_MS,
            render: PaperRenderSpec::default(),
            max_speckle_density: 0.002,
            digitize: DigitizeConfig::default(),
            detrend: DetrendConfig::default(),
        }
    }
}

/// Draws one patient's waveform. Both classes share every range except the
/// ARVC markers: epsilon bump, slow S upstroke and inverted T.
pub fn patient_params(arvc: bool, seed: u64) -> EcgParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = if arvc {
        EcgParams::arvc(seed)
    } else {
        EcgParams::normal(seed)
    };
    p.heart_rate = rng.gen_range(60.0..90.0);
    p.phase = rng.gen_range(0.0..1.0);
    p.amplitudes.r = rng.gen_range(0.9..1.5);
    p.amplitudes.p = rng.gen_range(0.1..0.2);
    p.amplitudes.s = -rng.gen_range(0.15..0.35);
    p.amplitudes.t = rng.gen_range(0.2..0.4);
    p.widths.r = rng.gen_range(8.0..12.0);
    p.widths.t = rng.gen_range(40.0..55.0);
    p.noise_sd = rng.gen_range(0.005..0.02);
    p.drift.amplitude_mv = rng.gen_range(0.0..0.2);
    p.drift.period_s = rng.gen_range(1.5..4.0);
    if arvc {
        p.epsilon_wave.amplitude_mv = rng.gen_range(0.08..0.15);
        p.epsilon_wave.delay_ms = rng.gen_range(85.0..100.0);
        p.s_upstroke_ms = rng.gen_range(55.0..70.0);
    } else {
        p.s_upstroke_ms = rng.gen_range(30.0..45.0);
    }
    p
}

/// One synthetic patient after the full scan-to-beats pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPatient {
    pub id: String,
    pub arvc: bool,
    pub ecg: SyntheticEcg,
    /// Detrended digitized signal.
    pub digitized: Signal,
    pub beats: Vec<Beat>,
    /// Ground truth of the beat nearest to each detected R peak.
    pub landmarks: Vec<Option<BeatLandmarks>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub patients: Vec<SyntheticPatient>,
}

impl Dataset {
    pub fn labeled_beats(&self) -> Vec<LabeledBeat> {
        self.patients
            .iter()
            .flat_map(|p| {
                p.beats.iter().map(|b| LabeledBeat {
                    image: render_beat_image(b),
                    label: p.arvc,
                    patient_id: p.id.clone(),
                })
            })
            .collect()
    }

    pub fn beat_count(&self) -> usize {
        self.patients.iter().map(|p| p.beats.len()).sum()
    }

    /// Writes `beat-NNNN.png` and `beat-NNNN.csv` per beat plus
    /// `manifest.jsonl`, returning the manifest path.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut records = Vec::with_capacity(self.beat_count());
        for p in &self.patients {
            for (beat, lm) in p.beats.iter().zip(&p.landmarks) {
                let stem = format!("beat-{:04}", records.len());
                let png = format!("{stem}.png");
                let csv = format!("{stem}.csv");
                render_beat_image(beat).save_png(dir.join(&png))?;
                beat.samples.write_csv_file(dir.join(&csv))?;
                records.push(ManifestRecord {
                    patient_id: p.id.clone(),
                    label: Some(p.arvc),
                    beat_png_path: png,
                    beat_csv_path: csv,
                    landmarks: *lm,
                });
            }
        }
        let path = dir.join(MANIFEST_FILE);
        write_manifest(&path, &records)?;
        Ok(path)
    }
}

/// Runs one strip through render, digitize, detrend, peaks and segmentation.
pub fn synthesize_patient(id: String, arvc: bool, seed: u64, opts: &DatasetOptions) -> Result<SyntheticPatient> {
    let params = patient_params(arvc, seed);
    let ecg = generate_ecg(&params, opts.duration_s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let render = PaperRenderSpec {
        seed,
        speckle_density: if opts.max_speckle_density > 0.0 {
            rng.gen_range(0.0..opts.max_speckle_density)
        } else {
            0.0
        },
        ..opts.render
    };
    let image = render_paper(&ecg.signal, &render)?;
    let digitize_cfg = DigitizeConfig {
        calibration: render.calibration(),
        ..opts.digitize
    };
    let (raw, _) = digitize(&image, &digitize_cfg)?;
    let digitized = detrend_median(&raw, &opts.detrend)?;
    let peaks = detect_r_peaks(&digitized);
    let beats = segment_beats(&digitized, &peaks, opts.window_ms);
    let landmarks = beats
        .iter()
        .map(|b| {
            let r = b.samples.time_of(b.r_index);
            ecg.landmarks
                .iter()
                .min_by(|a, b| (a.r_ms - r).abs().total_cmp(&(b.r_ms - r).abs()))
                .filter(|l| (l.r_ms - r).abs() < 50.0)
                .copied()
        })
        .collect();
    Ok(SyntheticPatient {
        id,
        arvc,
        ecg,
        digitized,
        beats,
        landmarks,
    })
}

/// Patient `i` uses seed `seed + i`; normals come first.
pub fn make_dataset(n_normal: usize, n_arvc: usize, seed: u64, opts: &DatasetOptions) -> Result<Dataset> {
    if n_normal == 0 || n_arvc == 0 {
        return Err(Error::InvalidConfig("each class needs at least one patient".into()));
    }
    let patients = (0..n_normal + n_arvc)
        .map(|i| synthesize_patient(format!("patient-{i:03}"), i >= n_normal, seed + i as u64, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { patients })
}

pub const MANIFEST_FILE: &str = "manifest.jsonl";

/// One beat on disk. Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub patient_id: String,
    /// `true` for ARVC; absent when the class is unknown.
    pub label: Option<bool>,
    pub beat_png_path: String,
    pub beat_csv_path: String,
    pub landmarks: Option<BeatLandmarks>,
}

pub fn write_manifest(path: impl AsRef<Path>, records: &[ManifestRecord]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRecord>> {
    std::fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::InvalidDataset(format!("manifest line {}: {e}", i + 1)))
        })
        .collect()
}
