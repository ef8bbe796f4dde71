//! Cross-module invariants checked over random inputs.

mod common;

use ecgkit::bayes::{posterior_arvc, BeatTally, DiagnosticProfile};
use ecgkit::cnn::{
    conv2d, miniature_specs, sigmoid, ConvLayer, Dims, LayerSpec, Model, Pass, Tensor3, TensorBatch, MINIATURE_INPUT,
};
use ecgkit::imgproc::{extract_contour, BinaryImage};
use ecgkit::preproc::{detect_r_peaks, savgol_smooth, segment_beats, SmoothConfig};
use ecgkit::spectral::{amplitude_spectrum, normalize_and_band, resample_for_grid, GRID_LEN, GRID_RATE_HZ};
use ecgkit::stats::{levene, mann_whitney_u, pearson_with_ci, t_test, TVariant};
use ecgkit::synth::{generate_ecg, patient_params, EcgParams};
use ecgkit::Signal;
use proptest::prelude::*;

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig {
        cases: n,
        ..ProptestConfig::default()
    }
}

fn sample(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-10.0f64..10.0, len)
}

proptest! {
    #![proptest_config(cases(64))]

    #[test]
    fn contour_rows_stay_inside_each_columns_ink(bits in proptest::collection::vec(prop::bool::weighted(0.2), 20 * 30)) {
        let img = BinaryImage::new(20, 30, 600, bits.iter().map(|&b| u8::from(!b)).collect()).unwrap();
        let contour = extract_contour(&img);
        for (col, row) in contour.points() {
            let black: Vec<usize> = (0..20).filter(|&r| img.is_black(r, col)).collect();
            match row {
                Some(r) => prop_assert!(black.first().unwrap() <= &r && r <= *black.last().unwrap()),
                None => prop_assert!(black.is_empty()),
            }
        }
    }

    #[test]
    fn savgol_passes_cubics_through(c in proptest::array::uniform4(-2.0f64..2.0), len in 30usize..120) {
        let t = |i: usize| i as f64 / len as f64;
        let y: Vec<f64> = (0..len).map(|i| c[0] + c[1] * t(i) + c[2] * t(i).powi(2) + c[3] * t(i).powi(3)).collect();
        let sig = Signal::new(y.clone(), 2.0, 0.0).unwrap();
        let out = savgol_smooth(&sig, &SmoothConfig::default()).unwrap();
        for (a, b) in out.samples().iter().zip(&y) {
            prop_assert!((a - b).abs() <= 1e-9, "{} vs {}", a, b);
        }
    }

    #[test]
    fn peaks_ignore_positive_scaling(seed in 0u64..500, scale in 0.05f64..20.0) {
        let sig = generate_ecg(&patient_params(seed % 2 == 1, seed), 6.0).unwrap().signal;
        let scaled = sig.with_samples(sig.samples().iter().map(|v| v * scale).collect()).unwrap();
        prop_assert_eq!(detect_r_peaks(&sig), detect_r_peaks(&scaled));
    }

    #[test]
    fn beats_have_the_window_length_and_stay_inside(seed in 0u64..500, window in 300.0f64..900.0) {
        let sig = generate_ecg(&patient_params(false, seed), 5.0).unwrap().signal;
        let peaks = detect_r_peaks(&sig);
        let want = (window / sig.sample_period()).round() as usize;
        for beat in segment_beats(&sig, &peaks, window) {
            prop_assert_eq!(beat.samples.len(), want);
            prop_assert!(beat.r_index < want);
            prop_assert!(beat.samples.t0() >= sig.t0());
            prop_assert!(beat.samples.time_of(want - 1) <= sig.time_of(sig.len() - 1) + 1e-9);
        }
    }

    #[test]
    fn sigmoid_stays_open(x in -1e4f64..1e4) {
        let s = sigmoid(x);
        prop_assert!(s > 0.0 && s < 1.0);
    }

    #[test]
    fn bias_free_convolution_is_linear(
        x in proptest::collection::vec(-1.0f64..1.0, 6 * 6 * 2),
        y in proptest::collection::vec(-1.0f64..1.0, 6 * 6 * 2),
        k in proptest::collection::vec(-1.0f64..1.0, 3 * 3 * 2 * 2),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let layer = ConvLayer::new(3, 3, 2, 2, k, vec![0.0; 2]).unwrap();
        let dims = Dims::new(6, 6, 2);
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let lhs = conv2d(&Tensor3::new(dims, mix).unwrap(), &layer).unwrap();
        let cx = conv2d(&Tensor3::new(dims, x).unwrap(), &layer).unwrap();
        let cy = conv2d(&Tensor3::new(dims, y).unwrap(), &layer).unwrap();
        for ((l, p), q) in lhs.data().iter().zip(cx.data()).zip(cy.data()) {
            prop_assert!((l - (a * p + b * q)).abs() <= 1e-12 * (1.0 + l.abs()));
        }
    }

    #[test]
    fn posterior_is_interior_and_rises_with_abnormal_beats(
        n in 1u64..60,
        sens in 0.55f64..0.999,
        spec in 0.55f64..0.999,
        prior in 0.001f64..0.999,
    ) {
        let profile = DiagnosticProfile::new(sens, spec, prior).unwrap();
        let post: Vec<f64> = (0..=n).map(|x| posterior_arvc(BeatTally::new(n, x).unwrap(), &profile).unwrap()).collect();
        for p in &post {
            prop_assert!((0.0..=1.0).contains(p));
        }
        // strict rise holds mathematically; in floating point it can stall at 0 or 1
        for w in post.windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
        let mid = posterior_arvc(BeatTally::new(2, 1).unwrap(), &profile).unwrap();
        prop_assert!(mid > 0.0 && mid < 1.0);
    }

    #[test]
    fn indifferent_tally_returns_the_prior(half in 0u64..40, q in 0.51f64..0.99, prior in 0.001f64..0.999) {
        // sens = spec = q: each abnormal beat's evidence cancels one normal beat
        let profile = DiagnosticProfile::new(q, q, prior).unwrap();
        let p = posterior_arvc(BeatTally::new(2 * half, half).unwrap(), &profile).unwrap();
        prop_assert!((p - prior).abs() <= 1e-12, "{} vs {}", p, prior);
    }

    #[test]
    fn spectrum_scales_linearly(x in proptest::collection::vec(-2.0f64..2.0, 64..300), a in 0.01f64..50.0) {
        let sig = Signal::new(x.clone(), 2.0, 0.0).unwrap();
        let scaled = sig.with_samples(x.iter().map(|v| a * v).collect()).unwrap();
        let (s1, s2) = (amplitude_spectrum(&sig).unwrap(), amplitude_spectrum(&scaled).unwrap());
        let top = s1.amplitudes.iter().cloned().fold(0.0, f64::max);
        for (p, q) in s1.amplitudes.iter().zip(&s2.amplitudes) {
            prop_assert!((a * p - q).abs() <= 1e-9 * a * (1.0 + top));
        }
    }

    #[test]
    fn p_values_are_probabilities_and_swaps_behave(a in sample(3..25), b in sample(3..25)) {
        let (ab, ba) = (mann_whitney_u(&a, &b), mann_whitney_u(&b, &a));
        prop_assert!((0.0..=1.0).contains(&ab.p_value));
        prop_assert!((ab.p_value - ba.p_value).abs() <= 1e-12);
        for variant in [TVariant::Student, TVariant::Welch] {
            if let (Ok(t1), Ok(t2)) = (t_test(&a, &b, variant), t_test(&b, &a, variant)) {
                prop_assert!((0.0..=1.0).contains(&t1.p_value));
                prop_assert!((t1.statistic + t2.statistic).abs() <= 1e-9 * (1.0 + t1.statistic.abs()));
                prop_assert!((t1.p_value - t2.p_value).abs() <= 1e-12);
            }
        }
        if let (Ok(l1), Ok(l2)) = (levene(&a, &b), levene(&b, &a)) {
            prop_assert!((0.0..=1.0).contains(&l1.p_value));
            prop_assert!((l1.statistic - l2.statistic).abs() <= 1e-9 * (1.0 + l1.statistic.abs()));
        }
    }

    #[test]
    fn pearson_ignores_positive_affine_maps(
        pairs in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 5..40),
        scale in 0.1f64..10.0,
        shift in -10.0f64..10.0,
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let Ok(base) = pearson_with_ci(&a, &b) else { return Ok(()) };
        let moved: Vec<f64> = a.iter().map(|v| scale * v + shift).collect();
        let r = pearson_with_ci(&moved, &b).unwrap();
        prop_assert!((r.r - base.r).abs() <= 1e-9);
        prop_assert!((r.ci95.0 - base.ci95.0).abs() <= 1e-8 && (r.ci95.1 - base.ci95.1).abs() <= 1e-8);
        prop_assert!((r.r - common::pearson_r(&a, &b)).abs() <= 1e-9);
    }

    #[test]
    fn student_matches_welch_for_balanced_equal_variances(a in sample(3..20), shift in -5.0f64..5.0, flip in any::<bool>()) {
        // a reflected, shifted copy has the same size and variance
        let b: Vec<f64> = a.iter().map(|v| if flip { shift - v } else { shift + v }).collect();
        if let (Ok(s), Ok(w)) = (t_test(&a, &b, TVariant::Student), t_test(&a, &b, TVariant::Welch)) {
            prop_assert!((s.statistic - w.statistic).abs() <= 1e-9 * (1.0 + s.statistic.abs()));
        }
    }
}

#[test]
fn inference_ignores_dropout_rates() {
    let with_rates = |r1: f64, r2: f64| {
        let specs: Vec<LayerSpec> = miniature_specs()
            .into_iter()
            .scan(0, |seen, s| {
                Some(match s {
                    LayerSpec::Dropout { .. } => {
                        *seen += 1;
                        LayerSpec::Dropout {
                            rate: if *seen == 1 { r1 } else { r2 },
                        }
                    }
                    other => other,
                })
            })
            .collect();
        Model::build(MINIATURE_INPUT, &specs, 11).unwrap()
    };
    let x: Vec<Tensor3> = (0..4)
        .map(|k| {
            Tensor3::new(
                MINIATURE_INPUT,
                (0..144).map(|i| ((i * 7 + k * 13) % 17) as f64 / 17.0).collect(),
            )
            .unwrap()
        })
        .collect();
    let batch = TensorBatch::from_samples(&x).unwrap();
    let base = with_rates(0.0, 0.0).predict_batch(batch.clone(), Pass::Infer).unwrap();
    for (r1, r2) in [(0.3, 0.2), (0.9, 0.5), (0.5, 0.0)] {
        assert_eq!(
            with_rates(r1, r2).predict_batch(batch.clone(), Pass::Infer).unwrap(),
            base
        );
    }
}

#[test]
fn banding_is_idempotent() {
    let sig = generate_ecg(&EcgParams::arvc(2), 10.0).unwrap().signal;
    let grid = resample_for_grid(&sig, GRID_RATE_HZ, GRID_LEN).unwrap();
    let once = normalize_and_band(&amplitude_spectrum(&grid).unwrap()).unwrap();
    assert_eq!(normalize_and_band(&once).unwrap(), once);
    // grid bins fall on exact quarter-hertz multiples
    for f in &once.frequencies {
        assert_eq!((f * 4.0).fract(), 0.0);
    }
}

#[test]
fn r_landmarks_sit_on_the_generated_r_peaks() {
    for seed in 0..20 {
        let params = patient_params(seed % 2 == 0, seed);
        let ecg = generate_ecg(
            &EcgParams {
                noise_sd: 0.0,
                ..params
            },
            8.0,
        )
        .unwrap();
        let period = ecg.signal.sample_period();
        for lm in &ecg.landmarks {
            let i = ((lm.r_ms - ecg.signal.t0()) / period).round() as isize;
            if i < 3 || i as usize + 3 >= ecg.signal.len() {
                continue;
            }
            let window = (i - 3) as usize..=(i + 3) as usize;
            let peak = window
                .clone()
                .max_by(|&a, &b| ecg.signal.samples()[a].total_cmp(&ecg.signal.samples()[b]))
                .unwrap();
            assert!(
                (peak as isize - i).abs() <= 1,
                "seed {seed}: R at sample {i}, local max at {peak}"
            );
        }
    }
}
