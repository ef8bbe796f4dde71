//! Run configuration: every tunable of the pipeline in one JSON document,
//! with command-line flags layered on top.

use std::path::{Path, PathBuf};

use ecgkit::bayes::DiagnosticProfile;
use ecgkit::cnn::{TrainConfig, DECISION_THRESHOLD};
use ecgkit::imgproc::{CalibrationSpec, DespeckleFilter, DigitizeConfig};
use ecgkit::preproc::{DetrendConfig, SmoothConfig, DEFAULT_BEAT_WINDOW_MS};
use serde::{Deserialize, Serialize};

use crate::error::{at, CliError, CliResult, USAGE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Output directory; `--out` wins over this.
    pub out: PathBuf,
    pub seed: u64,
    pub calibration: CalibrationSpec,
    /// Darkness quantile kept as ink.
    pub percentile: f64,
    pub despeckle: DespeckleFilter,
    pub detrend: DetrendConfig,
    pub smooth: SmoothConfig,
    pub window_ms: f64,
    pub train: TrainConfig,
    pub repeats: usize,
    /// Beat probability at or above which a beat counts as abnormal.
    pub threshold: f64,
    pub profile: DiagnosticProfile,
    pub alpha: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out: PathBuf::from("."),
            seed: 0,
            calibration: CalibrationSpec::default(),
            percentile: 0.95,
            despeckle: DespeckleFilter::default(),
            detrend: DetrendConfig::default(),
            smooth: SmoothConfig::default(),
            window_ms: DEFAULT_BEAT_WINDOW_MS,
            train: TrainConfig::default(),
            repeats: 1,
            threshold: DECISION_THRESHOLD,
            profile: DiagnosticProfile::reference(),
            alpha: 0.05,
        }
    }
}

/// Flag overrides; `None` leaves the loaded value alone.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub k: Option<usize>,
    pub c: Option<f64>,
    pub order: Option<usize>,
    pub lr: Option<f64>,
    pub epochs: Option<usize>,
    pub repeats: Option<usize>,
    pub prior: Option<f64>,
    pub alpha: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::new(USAGE, format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::new(USAGE, format!("bad config {}: {e}", path.display())))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = &o.out {
            self.out = v.clone();
        }
        if let Some(v) = o.seed {
            self.seed = v;
            self.train.seed = v;
        }
        if let Some(v) = o.k {
            self.despeckle.k = v;
        }
        if let Some(v) = o.c {
            self.despeckle.c = v;
        }
        if let Some(v) = o.order {
            self.detrend.order = v;
        }
        if let Some(v) = o.lr {
            self.train.learning_rate = v;
        }
        if let Some(v) = o.epochs {
            self.train.epochs = v;
        }
        if let Some(v) = o.repeats {
            self.repeats = v;
        }
        if let Some(v) = o.prior {
            self.profile.prior = v;
        }
        if let Some(v) = o.alpha {
            self.alpha = v;
        }
    }

    /// Checks every section against its own module's rules.
    pub fn validate(&self) -> CliResult {
        self.calibration.validate().map_err(at(USAGE))?;
        self.despeckle.validate().map_err(at(USAGE))?;
        self.detrend.validate().map_err(at(USAGE))?;
        self.smooth.validate().map_err(at(USAGE))?;
        self.train.validate().map_err(at(USAGE))?;
        self.profile.validate().map_err(at(USAGE))?;
        let bad = |msg: String| Err(CliError::new(USAGE, msg));
        if !(self.percentile > 0.0 && self.percentile < 1.0) {
            return bad(format!("percentile must lie in (0, 1), got {}", self.percentile));
        }
        if !(self.window_ms > 0.0 && self.window_ms.is_finite()) {
            return bad(format!("beat window must be positive, got {} ms", self.window_ms));
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("threshold must lie in [0, 1], got {}", self.threshold));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        Ok(())
    }

    pub fn digitize_config(&self) -> DigitizeConfig {
        DigitizeConfig {
            percentile: self.percentile,
            filter: self.despeckle,
            calibration: self.calibration,
        }
    }
}
