use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ecgkit::imgproc::{digitize, DigitizeConfig, GrayImage};
use ecgkit::preproc::{detect_r_peaks, detrend_median, segment_beats, DetrendConfig};
use ecgkit::synth::{generate_ecg, read_manifest, EcgParams};
use ecgkit::Signal;
use tempfile::TempDir;

fn ecgkit(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecgkit"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> Output {
    let out = ecgkit(args, dir);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn read(path: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// A rendered strip in `dir/s/strip.png` with its clean signal alongside.
fn strip(dir: &Path, seed: &str) -> PathBuf {
    ok(
        &["synth", "strip", "--seed", seed, "--speckle", "0.002", "--out", "s"],
        dir,
    );
    dir.join("s")
}

fn write_signal(dir: &Path, name: &str, sig: &Signal) -> PathBuf {
    let path = dir.join(name);
    sig.write_csv_file(&path).unwrap();
    path
}

#[test]
fn digitized_strip_tracks_ground_truth() {
    let tmp = TempDir::new().unwrap();
    let s = strip(tmp.path(), "4");
    ok(&["digitize", "s/strip.png", "--report", "--out", "d"], tmp.path());
    let got = Signal::read_csv_file(tmp.path().join("d/strip.csv")).unwrap();
    let truth = Signal::read_csv_file(s.join("strip-truth.csv")).unwrap();
    let expected: Vec<f64> = (0..got.len()).map(|i| truth.value_at(got.time_of(i))).collect();
    let r = pearson(got.samples(), &expected);
    assert!(r >= 0.95, "r = {r}");

    let report: serde_json::Value = serde_json::from_slice(&read(tmp.path().join("d/strip.report.json"))).unwrap();
    for key in ["threshold", "flipped_pixels", "absent_columns"] {
        assert!(report.get(key).is_some(), "report lacks {key}");
    }
}

#[test]
fn blank_page_is_a_digitization_error() {
    let tmp = TempDir::new().unwrap();
    GrayImage::filled(200, 300, 600, 1.0)
        .unwrap()
        .save_png(tmp.path().join("blank.png"))
        .unwrap();
    let out = ecgkit(&["digitize", "blank.png"], tmp.path());
    assert_eq!(code(&out), 2);
    assert!(!out.stderr.is_empty());
    assert_eq!(code(&ecgkit(&["digitize", "missing.png"], tmp.path())), 2);
}

#[test]
fn default_filter_flags_change_nothing() {
    let tmp = TempDir::new().unwrap();
    strip(tmp.path(), "5");
    ok(&["digitize", "s/strip.png", "--out", "a"], tmp.path());
    ok(
        &["digitize", "s/strip.png", "--k", "5", "--c", "0.5", "--out", "b"],
        tmp.path(),
    );
    assert_eq!(
        read(tmp.path().join("a/strip.csv")),
        read(tmp.path().join("b/strip.csv"))
    );
}

#[test]
fn ten_seconds_at_75_bpm_segment_into_ten_to_thirteen_beats() {
    let tmp = TempDir::new().unwrap();
    let ecg = generate_ecg(&EcgParams::normal(0), 10.0).unwrap();
    write_signal(tmp.path(), "normal.csv", &ecg.signal);
    ok(
        &["segment", "normal.csv", "--label", "normal", "--out", "beats"],
        tmp.path(),
    );
    let records = read_manifest(tmp.path().join("beats/manifest.jsonl")).unwrap();
    assert!((10..=13).contains(&records.len()), "{} beats", records.len());
    assert!(records
        .iter()
        .all(|r| r.label == Some(false) && r.patient_id == "normal"));

    let expected_len = (700.0 / ecg.signal.sample_period()).round() as usize;
    let beat = Signal::read_csv_file(tmp.path().join("beats").join(&records[0].beat_csv_path)).unwrap();
    assert_eq!(beat.len(), expected_len);
    assert!(tmp.path().join("beats").join(&records[0].beat_png_path).exists());
}

#[test]
fn flat_line_has_no_beats() {
    let tmp = TempDir::new().unwrap();
    write_signal(tmp.path(), "flat.csv", &Signal::new(vec![0.0; 5000], 2.0, 0.0).unwrap());
    let out = ecgkit(&["segment", "flat.csv", "--out", "beats"], tmp.path());
    assert_eq!(code(&out), 3);
    assert!(read_manifest(tmp.path().join("beats/manifest.jsonl"))
        .unwrap()
        .is_empty());
}

#[test]
fn file_pipeline_matches_in_process_pipeline() {
    let tmp = TempDir::new().unwrap();
    strip(tmp.path(), "6");
    ok(&["digitize", "s/strip.png", "--out", "d"], tmp.path());
    ok(&["segment", "d/strip.csv", "--out", "b"], tmp.path());

    let img = GrayImage::load_png(tmp.path().join("s/strip.png"), 600).unwrap();
    let (sig, _) = digitize(&img, &DigitizeConfig::default()).unwrap();
    let from_file = Signal::read_csv_file(tmp.path().join("d/strip.csv")).unwrap();
    assert_eq!(sig.len(), from_file.len());
    for (a, b) in sig.samples().iter().zip(from_file.samples()) {
        assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0), "{a} vs {b}");
    }

    let detrended = detrend_median(&sig, &DetrendConfig::default()).unwrap();
    let beats = segment_beats(&detrended, &detect_r_peaks(&detrended), 700.0);
    let records = read_manifest(tmp.path().join("b/manifest.jsonl")).unwrap();
    assert_eq!(records.len(), beats.len());
    for (r, beat) in records.iter().zip(&beats) {
        let disk = Signal::read_csv_file(tmp.path().join("b").join(&r.beat_csv_path)).unwrap();
        assert_eq!(disk.len(), beat.samples.len());
        for (a, b) in beat.samples.samples().iter().zip(disk.samples()) {
            assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0), "{a} vs {b}");
        }
    }
}

#[test]
fn train_classify_diagnose_compose() {
    let tmp = TempDir::new().unwrap();
    ok(
        &[
            "synth",
            "dataset",
            "--normal",
            "2",
            "--arvc",
            "2",
            "--duration",
            "3",
            "--seed",
            "1",
            "--out",
            "data",
        ],
        tmp.path(),
    );
    let train = [
        "train",
        "data/manifest.jsonl",
        "--epochs",
        "1",
        "--batch-size",
        "8",
        "--seed",
        "3",
    ];
    ok(&[&train[..], &["--out", "m1"]].concat(), tmp.path());
    ok(&[&train[..], &["--out", "m2"]].concat(), tmp.path());
    assert_eq!(
        read(tmp.path().join("m1/model.json")),
        read(tmp.path().join("m2/model.json"))
    );
    assert_eq!(
        read(tmp.path().join("m1/metrics.json")),
        read(tmp.path().join("m2/metrics.json"))
    );
    let curves = String::from_utf8(read(tmp.path().join("m1/curves.csv"))).unwrap();
    assert!(curves.starts_with("epoch,train_loss,train_acc,test_loss,test_acc\n"));

    ok(
        &["classify", "m1/model.json", "data/manifest.jsonl", "--out", "c"],
        tmp.path(),
    );
    let classified = String::from_utf8(read(tmp.path().join("c/classify.csv"))).unwrap();
    let beats = read_manifest(tmp.path().join("data/manifest.jsonl")).unwrap();
    assert!(classified.starts_with("patient_id,beat_png_path,probability,abnormal\n"));
    assert_eq!(classified.lines().count(), beats.len() + 1);

    ok(&["diagnose", "c/classify.csv", "--out", "g"], tmp.path());
    let diagnosis: serde_json::Value = serde_json::from_slice(&read(tmp.path().join("g/diagnosis.json"))).unwrap();
    let patients = diagnosis["patients"].as_array().unwrap();
    assert_eq!(patients.len(), 4);
    let total: u64 = patients.iter().map(|p| p["n"].as_u64().unwrap()).sum();
    assert_eq!(total as usize, beats.len());

    let unlabeled = tmp.path().join("data/unlabeled.jsonl");
    std::fs::write(
        &unlabeled,
        String::from_utf8(read(tmp.path().join("data/manifest.jsonl")))
            .unwrap()
            .replace("\"label\":false", "\"label\":null"),
    )
    .unwrap();
    assert_eq!(
        code(&ecgkit(&["train", "data/unlabeled.jsonl", "--epochs", "1"], tmp.path())),
        5
    );
    assert_eq!(
        code(&ecgkit(
            &["classify", "data/manifest.jsonl", "data/manifest.jsonl"],
            tmp.path()
        )),
        5
    );
}

fn posterior(tmp: &Path, args: &[&str]) -> f64 {
    ok(&[&["diagnose", "--out", "g"], args].concat(), tmp);
    let v: serde_json::Value = serde_json::from_slice(&read(tmp.join("g/diagnosis.json"))).unwrap();
    v["patients"][0]["posterior"].as_f64().unwrap()
}

#[test]
fn diagnose_from_counts() {
    let tmp = TempDir::new().unwrap();
    assert!(posterior(tmp.path(), &["--n", "10", "--x", "10"]) > 0.9999);
    let p = posterior(tmp.path(), &["--n", "0", "--x", "0", "--prior", "0.25"]);
    assert!((p - 0.25).abs() < 1e-12, "{p}");
    assert_eq!(code(&ecgkit(&["diagnose", "--n", "3", "--x", "4"], tmp.path())), 1);
    assert_eq!(
        code(&ecgkit(
            &["diagnose", "--n", "3", "--x", "1", "--prior", "0"],
            tmp.path()
        )),
        1
    );

    ok(&["curve", "--n", "10", "--out", "g"], tmp.path());
    let curve = String::from_utf8(read(tmp.path().join("g/curve.csv"))).unwrap();
    assert_eq!(curve.lines().count(), 12);
}

#[test]
fn spectra_compare_with_documented_header() {
    let tmp = TempDir::new().unwrap();
    let mut normal = Vec::new();
    let mut arvc = Vec::new();
    for seed in 0..6u64 {
        let mut p = EcgParams::normal(seed);
        p.noise_sd = 0.02;
        normal.push(write_signal(
            tmp.path(),
            &format!("n{seed}.csv"),
            &generate_ecg(&p, 10.0).unwrap().signal,
        ));
        let mut p = EcgParams::arvc(seed + 100);
        p.noise_sd = 0.02;
        arvc.push(write_signal(
            tmp.path(),
            &format!("a{seed}.csv"),
            &generate_ecg(&p, 10.0).unwrap().signal,
        ));
    }
    let names = |v: &[PathBuf]| v.iter().map(|p| p.to_string_lossy().into_owned()).collect::<Vec<_>>();
    let (n, a) = (names(&normal), names(&arvc));
    let args = |files: &[String], label: &str| {
        let mut v = vec!["spectrum".to_string()];
        v.extend(files.iter().cloned());
        v.extend(["--label", label, "--out", "sp"].map(String::from));
        v
    };
    let run = |v: Vec<String>| ok(&v.iter().map(String::as_str).collect::<Vec<_>>(), tmp.path());
    run(args(&n, "N"));
    run(args(&a, "A"));
    let table = String::from_utf8(read(tmp.path().join("sp/N-spectra.csv"))).unwrap();
    assert_eq!(table.lines().count(), 78);
    assert!(table.starts_with("freq_hz,n0,n1"));

    ok(
        &["compare", "sp/N-spectra.csv", "sp/A-spectra.csv", "--out", "c1"],
        tmp.path(),
    );
    ok(
        &["compare", "sp/N-spectra.csv", "sp/A-spectra.csv", "--out", "c2"],
        tmp.path(),
    );
    let cmp = read(tmp.path().join("c1/comparison.csv"));
    assert_eq!(cmp, read(tmp.path().join("c2/comparison.csv")));
    let text = String::from_utf8(cmp).unwrap();
    assert_eq!(
        text.lines().next(),
        Some("freq_hz,mean_N,sd_N,mean_A,sd_A,test,statistic,p_value,significant")
    );
    assert_eq!(text.lines().count(), 78);
    // the fundamental at 1.25 Hz separates the presets
    let fundamental = text.lines().find(|l| l.starts_with("1.25,")).unwrap();
    assert!(fundamental.ends_with(",true"), "{fundamental}");

    let short: String = table.lines().take(40).map(|l| format!("{l}\n")).collect();
    std::fs::write(tmp.path().join("short.csv"), short).unwrap();
    assert_eq!(
        code(&ecgkit(&["compare", "sp/N-spectra.csv", "short.csv"], tmp.path())),
        4
    );
}

#[test]
fn config_files_round_trip_and_usage_errors_exit_one() {
    let tmp = TempDir::new().unwrap();
    ok(
        &[
            "curve",
            "--n",
            "3",
            "--alpha",
            "0.01",
            "--order",
            "61",
            "--save-config",
            "run.json",
            "--out",
            "g",
        ],
        tmp.path(),
    );
    let saved: serde_json::Value = serde_json::from_slice(&read(tmp.path().join("run.json"))).unwrap();
    assert_eq!(saved["alpha"], 0.01);
    assert_eq!(saved["detrend"]["order"], 61);
    ok(
        &[
            "curve",
            "--n",
            "3",
            "--config",
            "run.json",
            "--save-config",
            "again.json",
        ],
        tmp.path(),
    );
    assert_eq!(read(tmp.path().join("run.json")), read(tmp.path().join("again.json")));

    std::fs::write(tmp.path().join("bad.json"), r#"{"detrend": {"order": 4}}"#).unwrap();
    assert_eq!(
        code(&ecgkit(&["curve", "--n", "3", "--config", "bad.json"], tmp.path())),
        1
    );
    assert_eq!(code(&ecgkit(&["no-such-command"], tmp.path())), 1);
    assert_eq!(code(&ecgkit(&["--help"], tmp.path())), 0);
}
