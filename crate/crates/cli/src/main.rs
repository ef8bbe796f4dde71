//! `ecgkit`: the paper-ECG pipeline as file-to-file subcommands.
//!
//! Exit codes: 1 usage or configuration, 2 digitization, 3 segmentation,
//! 4 spectral or statistics, 5 model and diagnosis.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::{SegmentArgs, TallySource};
use config::{Overrides, RunConfig};
use error::{CliError, CliResult, USAGE};

#[derive(Parser, Debug)]
#[command(
    name = "ecgkit",
    version,
    about = "Digitize paper ECGs, classify beats and compare cohort spectra"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Despeckle filter size (odd).
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Despeckle acceptance threshold.
    #[arg(long, global = true)]
    c: Option<f64>,
    /// Running-median detrend order (odd, samples).
    #[arg(long, global = true)]
    order: Option<usize>,
    #[arg(long, global = true)]
    lr: Option<f64>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    repeats: Option<usize>,
    #[arg(long, global = true)]
    prior: Option<f64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Write the merged configuration to this file and carry on.
    #[arg(long, global = true)]
    save_config: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Label {
    Normal,
    Arvc,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Scanned strip PNG to a signal CSV.
    Digitize {
        image: PathBuf,
        /// Also write threshold, flipped-pixel and absent-column counts.
        #[arg(long)]
        report: bool,
    },
    /// Signal CSV to beat PNGs, beat CSVs and a manifest.
    Segment {
        signal: PathBuf,
        /// Savitzky-Golay smoothing after detrending.
        #[arg(long)]
        smooth: bool,
        #[arg(long)]
        window_ms: Option<f64>,
        /// Patient id for the manifest; defaults to the file stem.
        #[arg(long)]
        patient: Option<String>,
        #[arg(long, value_enum)]
        label: Option<Label>,
    },
    /// Train the beat classifier on labeled manifests.
    Train {
        #[arg(required = true)]
        manifests: Vec<PathBuf>,
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Per-beat probabilities from a trained model.
    Classify {
        model: PathBuf,
        /// Manifests (`.jsonl`) or beat PNGs.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Patient posterior from classified beats or an explicit tally.
    Diagnose {
        /// Output of `classify`.
        #[arg(required_unless_present = "n", conflicts_with_all = ["n", "x"])]
        classified: Option<PathBuf>,
        #[arg(long, requires = "x")]
        n: Option<u64>,
        #[arg(long, requires = "n")]
        x: Option<u64>,
        #[command(flatten)]
        profile: ProfileArgs,
    },
    /// Posterior for every abnormal count out of `n` beats.
    Curve {
        #[arg(long)]
        n: u64,
        #[command(flatten)]
        profile: ProfileArgs,
    },
    /// Banded, normalized spectra of a cohort of signal CSVs.
    Spectrum {
        #[arg(required = true)]
        signals: Vec<PathBuf>,
        #[arg(long, default_value = "cohort")]
        label: String,
        /// Use the signals as given instead of detrending first.
        #[arg(long)]
        no_detrend: bool,
    },
    /// Per-bin comparison of two spectrum tables.
    Compare { normal: PathBuf, abnormal: PathBuf },
    /// Synthetic strips and datasets.
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Args, Debug)]
struct ProfileArgs {
    #[arg(long)]
    sensitivity: Option<f64>,
    #[arg(long)]
    specificity: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum SynthCommand {
    /// One rendered page plus its clean signal.
    Strip {
        #[arg(long, default_value = "strip")]
        name: String,
        #[arg(long)]
        arvc: bool,
        #[arg(long, default_value_t = 10.0)]
        duration: f64,
        #[arg(long, default_value_t = 0.0)]
        speckle: f64,
    },
    /// Labeled beats of several patients with a manifest.
    Dataset {
        #[arg(long, default_value_t = 10)]
        normal: usize,
        #[arg(long, default_value_t = 10)]
        arvc: usize,
        #[arg(long, default_value_t = 10.0)]
        duration: f64,
    },
}

fn load_config(g: &GlobalArgs) -> CliResult<RunConfig> {
    let mut cfg = match &g.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides {
        out: g.out.clone(),
        seed: g.seed,
        k: g.k,
        c: g.c,
        order: g.order,
        lr: g.lr,
        epochs: g.epochs,
        repeats: g.repeats,
        prior: g.prior,
        alpha: g.alpha,
    });
    Ok(cfg)
}

fn apply_profile(cfg: &mut RunConfig, p: &ProfileArgs) {
    if let Some(v) = p.sensitivity {
        cfg.profile.sensitivity = v;
    }
    if let Some(v) = p.specificity {
        cfg.profile.specificity = v;
    }
}

fn run(cli: Cli) -> CliResult {
    let mut cfg = load_config(&cli.global)?;
    match &cli.command {
        Command::Segment { window_ms: Some(w), .. } => cfg.window_ms = *w,
        Command::Train {
            batch_size: Some(b), ..
        } => cfg.train.batch_size = *b,
        Command::Classify { threshold: Some(t), .. } => cfg.threshold = *t,
        Command::Diagnose { profile, .. } | Command::Curve { profile, .. } => apply_profile(&mut cfg, profile),
        _ => {}
    }
    cfg.validate()?;
    if let Some(path) = &cli.global.save_config {
        let text = serde_json::to_string_pretty(&cfg).map_err(error::at(USAGE))?;
        std::fs::write(path, text + "\n").map_err(|e| CliError::new(USAGE, format!("{}: {e}", path.display())))?;
    }

    match cli.command {
        Command::Digitize { image, report } => commands::digitize_cmd(&cfg, &image, report),
        Command::Segment {
            signal,
            smooth,
            patient,
            label,
            ..
        } => commands::segment_cmd(
            &cfg,
            SegmentArgs {
                signal: &signal,
                smooth,
                patient,
                label: label.map(|l| l == Label::Arvc),
            },
        ),
        Command::Train { manifests, .. } => commands::train_cmd(&cfg, &manifests),
        Command::Classify { model, inputs, .. } => commands::classify_cmd(&cfg, &model, &inputs),
        Command::Diagnose { classified, n, x, .. } => {
            let source = match (&classified, n, x) {
                (Some(path), _, _) => TallySource::Classified(path),
                (None, Some(n), Some(x)) => TallySource::Counts { n, x },
                _ => {
                    return Err(CliError::new(
                        USAGE,
                        "diagnose needs a classify CSV or both --n and --x",
                    ))
                }
            };
            commands::diagnose_cmd(&cfg, source)
        }
        Command::Curve { n, .. } => commands::curve_cmd(&cfg, n),
        Command::Spectrum {
            signals,
            label,
            no_detrend,
        } => commands::spectrum_cmd(&cfg, &signals, &label, !no_detrend),
        Command::Compare { normal, abnormal } => commands::compare_cmd(&cfg, &normal, &abnormal),
        Command::Synth(SynthCommand::Strip {
            name,
            arvc,
            duration,
            speckle,
        }) => commands::synth_strip_cmd(&cfg, &name, arvc, duration, speckle),
        Command::Synth(SynthCommand::Dataset { normal, arvc, duration }) => {
            commands::synth_dataset_cmd(&cfg, normal, arvc, duration)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
