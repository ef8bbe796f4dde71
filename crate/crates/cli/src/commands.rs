use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ecgkit::bayes::{posterior_arvc, posterior_curve, BeatTally, DiagnosticProfile};
use ecgkit::cnn::{
    image_tensor, predict, train_repeated, write_curves_csv, Example, Model, RepeatSummary, Split, BEAT_INPUT,
};
use ecgkit::imgproc::{digitize, GrayImage};
use ecgkit::preproc::{detect_r_peaks, detrend_median, render_beat_image, savgol_smooth, segment_beats, BeatImage};
use ecgkit::signal::fmt_sig;
use ecgkit::spectral::{band_grid, banded_spectrum, mean_spectrum, write_mean_csv, SpectrumTable};
use ecgkit::stats::{compare_cohorts, write_comparison_csv};
use ecgkit::synth::{
    generate_ecg, make_dataset, patient_params, read_manifest, render_paper, write_manifest, DatasetOptions,
    ManifestRecord, PaperRenderSpec, MANIFEST_FILE,
};
use ecgkit::Signal;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{at, CliError, CliResult, DIGITIZE, MODEL, SEGMENT, SPECTRAL, USAGE};

pub const CLASSIFY_CSV_HEADER: &str = "patient_id,beat_png_path,probability,abnormal";

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".into())
}

fn out_dir(cfg: &RunConfig, code: u8) -> CliResult<&Path> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::new(code, format!("{}: {e}", cfg.out.display())))?;
    Ok(&cfg.out)
}

fn create(path: &Path, code: u8) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::new(code, format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T, code: u8) -> CliResult {
    let mut w = create(path, code)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(at(code))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(at(code))
}

fn read_signal(path: &Path, code: u8) -> CliResult<Signal> {
    Signal::read_csv_file(path).map_err(|e| CliError::new(code, format!("{}: {e}", path.display())))
}

fn log(msg: impl AsRef<str>) {
    eprintln!("{}", msg.as_ref());
}

pub fn digitize_cmd(cfg: &RunConfig, image: &Path, report: bool) -> CliResult {
    let dpi = cfg.calibration.dpi.round() as u32;
    let img =
        GrayImage::load_png(image, dpi).map_err(|e| CliError::new(DIGITIZE, format!("{}: {e}", image.display())))?;
    let (signal, rep) = digitize(&img, &cfg.digitize_config()).map_err(at(DIGITIZE))?;
    let dir = out_dir(cfg, DIGITIZE)?;
    let csv = dir.join(format!("{}.csv", stem(image)));
    signal.write_csv_file(&csv).map_err(at(DIGITIZE))?;
    if report {
        write_json(&dir.join(format!("{}.report.json", stem(image))), &rep, DIGITIZE)?;
    }
    log(format!("{} samples -> {}", signal.len(), csv.display()));
    Ok(())
}

pub struct SegmentArgs<'a> {
    pub signal: &'a Path,
    pub smooth: bool,
    pub patient: Option<String>,
    pub label: Option<bool>,
}

pub fn segment_cmd(cfg: &RunConfig, a: SegmentArgs) -> CliResult {
    let raw = read_signal(a.signal, SEGMENT)?;
    let mut sig = detrend_median(&raw, &cfg.detrend).map_err(at(SEGMENT))?;
    if a.smooth {
        sig = savgol_smooth(&sig, &cfg.smooth).map_err(at(SEGMENT))?;
    }
    let peaks = detect_r_peaks(&sig);
    let beats = segment_beats(&sig, &peaks, cfg.window_ms);
    let dir = out_dir(cfg, SEGMENT)?;
    let name = stem(a.signal);
    let patient = a.patient.unwrap_or_else(|| name.clone());
    let mut records = Vec::with_capacity(beats.len());
    for (i, beat) in beats.iter().enumerate() {
        let png = format!("{name}-beat-{i:04}.png");
        let csv = format!("{name}-beat-{i:04}.csv");
        render_beat_image(beat).save_png(dir.join(&png)).map_err(at(SEGMENT))?;
        beat.samples.write_csv_file(dir.join(&csv)).map_err(at(SEGMENT))?;
        records.push(ManifestRecord {
            patient_id: patient.clone(),
            label: a.label,
            beat_png_path: png,
            beat_csv_path: csv,
            landmarks: None,
        });
    }
    write_manifest(dir.join(MANIFEST_FILE), &records).map_err(at(SEGMENT))?;
    if records.is_empty() {
        return Err(CliError::new(
            SEGMENT,
            format!(
                "no complete beats found in {} ({} peaks)",
                a.signal.display(),
                peaks.len()
            ),
        ));
    }
    log(format!("{} beats from {} peaks", records.len(), peaks.len()));
    Ok(())
}

/// One beat raster resolved from a manifest or given directly.
struct BeatInput {
    patient_id: String,
    label: Option<bool>,
    path: PathBuf,
}

/// `.jsonl` inputs are manifests; anything else is a beat PNG on its own.
fn collect_beats(inputs: &[PathBuf]) -> CliResult<Vec<BeatInput>> {
    let mut out = Vec::new();
    for input in inputs {
        if input.extension().is_some_and(|e| e == "jsonl") {
            let base = input.parent().unwrap_or(Path::new("."));
            let records =
                read_manifest(input).map_err(|e| CliError::new(MODEL, format!("{}: {e}", input.display())))?;
            out.extend(records.into_iter().map(|r| BeatInput {
                patient_id: r.patient_id,
                label: r.label,
                path: base.join(r.beat_png_path),
            }));
        } else {
            out.push(BeatInput {
                patient_id: stem(input),
                label: None,
                path: input.clone(),
            });
        }
    }
    if out.is_empty() {
        return Err(CliError::new(MODEL, "no beats to process"));
    }
    Ok(out)
}

fn load_image(path: &Path) -> CliResult<BeatImage> {
    BeatImage::load_png(path).map_err(|e| CliError::new(MODEL, format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct TrainReport<'a> {
    beats: usize,
    patients: usize,
    repeats: usize,
    summary: &'a RepeatSummary,
    /// Split of the first run, the one whose model is saved.
    split: &'a Split,
}

pub fn train_cmd(cfg: &RunConfig, manifests: &[PathBuf]) -> CliResult {
    let beats = collect_beats(manifests)?;
    let examples = beats
        .iter()
        .map(|b| {
            let label = b.label.ok_or_else(|| {
                CliError::new(
                    MODEL,
                    format!("{} has no label; training needs labeled manifests", b.path.display()),
                )
            })?;
            Ok(Example {
                input: image_tensor(&load_image(&b.path)?),
                label,
                patient_id: b.patient_id.clone(),
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let patients = examples
        .iter()
        .map(|e| e.patient_id.as_str())
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    log(format!(
        "training on {} beats from {patients} patients, {} run(s)",
        examples.len(),
        cfg.repeats
    ));
    let (summary, first) = train_repeated(&examples, &cfg.train, cfg.repeats, Model::table2).map_err(at(MODEL))?;

    let dir = out_dir(cfg, MODEL)?;
    first.model.save(dir.join("model.json")).map_err(at(MODEL))?;
    let mut curves = create(&dir.join("curves.csv"), MODEL)?;
    write_curves_csv(&first.curves, &mut curves).map_err(at(MODEL))?;
    curves.flush().map_err(at(MODEL))?;
    let report = TrainReport {
        beats: examples.len(),
        patients,
        repeats: cfg.repeats,
        summary: &summary,
        split: &first.split,
    };
    write_json(&dir.join("metrics.json"), &report, MODEL)?;
    log(format!(
        "test accuracy {:.4} [{:.4}, {:.4}]",
        summary.accuracy.mean, summary.accuracy.lower, summary.accuracy.upper
    ));
    Ok(())
}

pub fn classify_cmd(cfg: &RunConfig, model_path: &Path, inputs: &[PathBuf]) -> CliResult {
    let model = Model::load(model_path).map_err(|e| CliError::new(MODEL, format!("{}: {e}", model_path.display())))?;
    if model.input_dims() != BEAT_INPUT {
        return Err(CliError::new(MODEL, "model does not take beat rasters as input"));
    }
    let beats = collect_beats(inputs)?;
    let tensors = beats
        .iter()
        .map(|b| load_image(&b.path).map(|img| image_tensor(&img)))
        .collect::<CliResult<Vec<_>>>()?;
    let probs = predict(&model, &tensors).map_err(at(MODEL))?;

    let dir = out_dir(cfg, MODEL)?;
    let mut w = csv_writer(create(&dir.join("classify.csv"), MODEL)?);
    w.write_record(CLASSIFY_CSV_HEADER.split(',')).map_err(at(MODEL))?;
    for (b, p) in beats.iter().zip(&probs) {
        let abnormal = u8::from(*p >= cfg.threshold).to_string();
        w.write_record([
            b.patient_id.as_str(),
            &b.path.to_string_lossy(),
            &fmt_sig(*p),
            &abnormal,
        ])
        .map_err(at(MODEL))?;
    }
    w.flush().map_err(at(MODEL))?;
    log(format!("classified {} beats", probs.len()));
    Ok(())
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

#[derive(Debug, Deserialize)]
struct ClassifyRow {
    patient_id: String,
    abnormal: u8,
}

#[derive(Debug, Serialize)]
struct PatientPosterior {
    patient_id: String,
    n: u64,
    x: u64,
    posterior: f64,
}

#[derive(Debug, Serialize)]
struct Diagnosis {
    profile: DiagnosticProfile,
    patients: Vec<PatientPosterior>,
}

/// Either a classify CSV or an explicit tally.
pub enum TallySource<'a> {
    Classified(&'a Path),
    Counts { n: u64, x: u64 },
}

pub fn diagnose_cmd(cfg: &RunConfig, source: TallySource) -> CliResult {
    let tallies: Vec<(String, BeatTally)> = match source {
        TallySource::Counts { n, x } => vec![("patient".into(), BeatTally::new(n, x).map_err(at(USAGE))?)],
        TallySource::Classified(path) => {
            let mut r =
                csv::Reader::from_path(path).map_err(|e| CliError::new(MODEL, format!("{}: {e}", path.display())))?;
            let mut counts: BTreeMap<String, (u64, u64)> = BTreeMap::new();
            for row in r.deserialize::<ClassifyRow>() {
                let row = row.map_err(|e| CliError::new(MODEL, format!("{}: {e}", path.display())))?;
                let c = counts.entry(row.patient_id).or_default();
                c.0 += 1;
                c.1 += u64::from(row.abnormal != 0);
            }
            counts.into_iter().map(|(p, (n, x))| (p, BeatTally { n, x })).collect()
        }
    };
    let patients = tallies
        .into_iter()
        .map(|(patient_id, t)| {
            let posterior = posterior_arvc(t, &cfg.profile).map_err(at(MODEL))?;
            Ok(PatientPosterior {
                patient_id,
                n: t.n,
                x: t.x,
                posterior,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    for p in &patients {
        log(format!(
            "{}: {}/{} abnormal, posterior {}",
            p.patient_id,
            p.x,
            p.n,
            fmt_sig(p.posterior)
        ));
    }
    let dir = out_dir(cfg, MODEL)?;
    write_json(
        &dir.join("diagnosis.json"),
        &Diagnosis {
            profile: cfg.profile,
            patients,
        },
        MODEL,
    )
}

pub fn curve_cmd(cfg: &RunConfig, n: u64) -> CliResult {
    let curve = posterior_curve(n, &cfg.profile).map_err(at(USAGE))?;
    let dir = out_dir(cfg, MODEL)?;
    let mut w = create(&dir.join("curve.csv"), MODEL)?;
    let io = at(MODEL);
    writeln!(w, "x,posterior").map_err(&io)?;
    for (x, p) in curve {
        writeln!(w, "{x},{}", fmt_sig(p)).map_err(&io)?;
    }
    w.flush().map_err(&io)
}

pub fn spectrum_cmd(cfg: &RunConfig, signals: &[PathBuf], label: &str, detrend: bool) -> CliResult {
    if signals.is_empty() {
        return Err(CliError::new(USAGE, "spectrum needs at least one signal"));
    }
    let mut table = SpectrumTable::new(label, band_grid());
    for path in signals {
        let mut sig = read_signal(path, SPECTRAL)?;
        if detrend {
            sig = detrend_median(&sig, &cfg.detrend).map_err(at(SPECTRAL))?;
        }
        let spectrum =
            banded_spectrum(&sig).map_err(|e| CliError::new(SPECTRAL, format!("{}: {e}", path.display())))?;
        table.push(stem(path), &spectrum).map_err(at(SPECTRAL))?;
    }
    let dir = out_dir(cfg, SPECTRAL)?;
    let mut w = create(&dir.join(format!("{label}-spectra.csv")), SPECTRAL)?;
    table.write_csv(&mut w).map_err(at(SPECTRAL))?;
    w.flush().map_err(at(SPECTRAL))?;
    let mut w = create(&dir.join(format!("{label}-mean.csv")), SPECTRAL)?;
    write_mean_csv(&mean_spectrum(&table).map_err(at(SPECTRAL))?, &mut w).map_err(at(SPECTRAL))?;
    w.flush().map_err(at(SPECTRAL))
}

pub fn compare_cmd(cfg: &RunConfig, normal: &Path, abnormal: &Path) -> CliResult {
    let load = |p: &Path, label: &str| {
        SpectrumTable::read_csv_file(p, label).map_err(|e| CliError::new(SPECTRAL, format!("{}: {e}", p.display())))
    };
    let rows =
        compare_cohorts(&load(normal, "N")?, &load(abnormal, "A")?, cfg.alpha, cfg.seed).map_err(at(SPECTRAL))?;
    let dir = out_dir(cfg, SPECTRAL)?;
    let mut w = create(&dir.join("comparison.csv"), SPECTRAL)?;
    write_comparison_csv(&rows, &mut w).map_err(at(SPECTRAL))?;
    w.flush().map_err(at(SPECTRAL))?;
    log(format!(
        "{} of {} bins significant at alpha {}",
        rows.iter().filter(|r| r.significant).count(),
        rows.len(),
        cfg.alpha
    ));
    Ok(())
}

fn render_spec(cfg: &RunConfig, speckle: f64) -> PaperRenderSpec {
    PaperRenderSpec {
        dpi: cfg.calibration.dpi.round() as u32,
        paper_speed: cfg.calibration.paper_speed,
        gain: cfg.calibration.gain,
        speckle_density: speckle,
        seed: cfg.seed,
        ..PaperRenderSpec::default()
    }
}

/// Renders one drawn patient to `<name>.png` with the clean signal in
/// `<name>-truth.csv` and its parameters in `<name>-params.json`.
pub fn synth_strip_cmd(cfg: &RunConfig, name: &str, arvc: bool, duration_s: f64, speckle: f64) -> CliResult {
    let params = patient_params(arvc, cfg.seed);
    let ecg = generate_ecg(&params, duration_s).map_err(at(USAGE))?;
    let image = render_paper(&ecg.signal, &render_spec(cfg, speckle)).map_err(at(USAGE))?;
    let dir = out_dir(cfg, USAGE)?;
    image.save_png(dir.join(format!("{name}.png"))).map_err(at(USAGE))?;
    ecg.signal
        .write_csv_file(dir.join(format!("{name}-truth.csv")))
        .map_err(at(USAGE))?;
    write_json(&dir.join(format!("{name}-params.json")), &params, USAGE)
}

pub fn synth_dataset_cmd(cfg: &RunConfig, n_normal: usize, n_arvc: usize, duration_s: f64) -> CliResult {
    let opts = DatasetOptions {
        duration_s,
        window_ms: cfg.window_ms,
        render: render_spec(cfg, 0.0),
        digitize: cfg.digitize_config(),
        detrend: cfg.detrend,
        ..DatasetOptions::default()
    };
    let data = make_dataset(n_normal, n_arvc, cfg.seed, &opts).map_err(at(USAGE))?;
    let manifest = data.write(out_dir(cfg, USAGE)?).map_err(at(USAGE))?;
    log(format!(
        "{} beats from {} patients -> {}",
        data.beat_count(),
        data.patients.len(),
        manifest.display()
    ));
    Ok(())
}
