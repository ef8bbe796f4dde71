use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{levene, mann_whitney_u, mean, sample_sd, t_test, KsCalibration, Method, TVariant, DEFAULT_KS_REPLICATES};
use crate::error::{Error, Result};
use crate::signal::fmt_sig;
use crate::spectral::{same_grid, SpectrumTable};

pub const COMPARISON_CSV_HEADER: &str = "freq_hz,mean_N,sd_N,mean_A,sd_A,test,statistic,p_value,significant";

/// One frequency bin of a cohort comparison. `test` is `T`, `WELCH` or `MWU`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub frequency: f64,
    pub mean_n: f64,
    pub sd_n: f64,
    pub mean_a: f64,
    pub sd_a: f64,
    pub test: Method,
    pub statistic: f64,
    pub p_value: f64,
    pub significant: bool,
}

/// Gate and test a single bin: both cohorts normal at `alpha` leads to
/// Levene and then Student or Welch, anything else to the rank-sum test.
pub fn compare_bin(
    frequency: f64,
    normal: &[f64],
    abnormal: &[f64],
    alpha: f64,
    cal_normal: &KsCalibration,
    cal_abnormal: &KsCalibration,
) -> Result<ComparisonRow> {
    let both_normal = cal_normal.test(normal)?.p_value > alpha && cal_abnormal.test(abnormal)?.p_value > alpha;
    let result = if both_normal {
        let variant = if levene(normal, abnormal)?.p_value > alpha {
            TVariant::Student
        } else {
            TVariant::Welch
        };
        t_test(normal, abnormal, variant)?
    } else {
        mann_whitney_u(normal, abnormal)
    };
    Ok(ComparisonRow {
        frequency,
        mean_n: mean(normal),
        sd_n: sample_sd(normal),
        mean_a: mean(abnormal),
        sd_a: sample_sd(abnormal),
        test: result.method,
        statistic: result.statistic,
        p_value: result.p_value,
        significant: result.p_value < alpha,
    })
}

/// Per-frequency comparison of two cohorts on a shared grid. The normality
/// gate is calibrated once per cohort size from `seed`.
pub fn compare_cohorts(
    normal: &SpectrumTable,
    abnormal: &SpectrumTable,
    alpha: f64,
    seed: u64,
) -> Result<Vec<ComparisonRow>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !same_grid(&normal.frequencies, &abnormal.frequencies) {
        return Err(Error::GridMismatch(format!(
            "{} and {} tables use different frequency grids",
            normal.label, abnormal.label
        )));
    }
    let cal_normal = KsCalibration::new(normal.len(), DEFAULT_KS_REPLICATES, seed)?;
    let cal_abnormal = if abnormal.len() == normal.len() {
        cal_normal.clone()
    } else {
        KsCalibration::new(abnormal.len(), DEFAULT_KS_REPLICATES, seed.wrapping_add(1))?
    };
    normal
        .frequencies
        .iter()
        .enumerate()
        .map(|(bin, &f)| {
            compare_bin(
                f,
                &normal.column(bin),
                &abnormal.column(bin),
                alpha,
                &cal_normal,
                &cal_abnormal,
            )
        })
        .collect()
}

pub fn write_comparison_csv<W: Write>(rows: &[ComparisonRow], mut writer: W) -> Result<()> {
    writeln!(writer, "{COMPARISON_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            writer,
            "{},{},{},{},{},{},{},{},{}",
            fmt_sig(r.frequency),
            fmt_sig(r.mean_n),
            fmt_sig(r.sd_n),
            fmt_sig(r.mean_a),
            fmt_sig(r.sd_a),
            r.test.as_str(),
            fmt_sig(r.statistic),
            fmt_sig(r.p_value),
            r.significant
        )?;
    }
    Ok(())
}
