use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use super::{clamp_p, mean, sample_variance, Method, TestResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TVariant {
    /// Pooled variance, `n1 + n2 - 2` degrees of freedom.
    Student,
    /// Separate variances, Welch–Satterthwaite degrees of freedom.
    Welch,
}

fn check_sizes(a: &[f64], b: &[f64]) -> Result<()> {
    let got = a.len().min(b.len());
    if got < 2 {
        return Err(Error::InsufficientSample { needed: 2, got });
    }
    Ok(())
}

/// Two-sided two-sample t-test. The statistic is positive when `a` has the
/// larger mean.
pub fn t_test(a: &[f64], b: &[f64], variant: TVariant) -> Result<TestResult> {
    check_sizes(a, b)?;
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let (m1, m2) = (mean(a), mean(b));
    let (v1, v2) = (sample_variance(a), sample_variance(b));
    let (se2, df) = match variant {
        TVariant::Student => {
            let pooled = ((n1 - 1.0) * v1 + (n2 - 1.0) * v2) / (n1 + n2 - 2.0);
            (pooled * (1.0 / n1 + 1.0 / n2), n1 + n2 - 2.0)
        }
        TVariant::Welch => {
            let (q1, q2) = (v1 / n1, v2 / n2);
            let se2 = q1 + q2;
            let df = se2 * se2 / (q1 * q1 / (n1 - 1.0) + q2 * q2 / (n2 - 1.0));
            (se2, df)
        }
    };
    let diff = m1 - m2;
    let (statistic, p_value) = if se2 > 0.0 {
        let t = diff / se2.sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::InvalidInput(e.to_string()))?;
        (t, clamp_p(2.0 * dist.cdf(-t.abs())))
    } else if diff == 0.0 {
        (0.0, 1.0)
    } else {
        (diff.signum() * f64::INFINITY, 0.0)
    };
    Ok(TestResult {
        statistic,
        p_value,
        method: match variant {
            TVariant::Student => Method::T,
            TVariant::Welch => Method::Welch,
        },
        n1: a.len(),
        n2: b.len(),
    })
}

/// Levene's test for equal variances on absolute deviations from each group
/// mean, referred to `F(1, n1 + n2 - 2)`.
pub fn levene(a: &[f64], b: &[f64]) -> Result<TestResult> {
    check_sizes(a, b)?;
    let za: Vec<f64> = {
        let m = mean(a);
        a.iter().map(|x| (x - m).abs()).collect()
    };
    let zb: Vec<f64> = {
        let m = mean(b);
        b.iter().map(|x| (x - m).abs()).collect()
    };
    let (n1, n2) = (za.len() as f64, zb.len() as f64);
    let (ma, mb) = (mean(&za), mean(&zb));
    let grand = (ma * n1 + mb * n2) / (n1 + n2);
    let between = n1 * (ma - grand).powi(2) + n2 * (mb - grand).powi(2);
    let within: f64 =
        za.iter().map(|z| (z - ma).powi(2)).sum::<f64>() + zb.iter().map(|z| (z - mb).powi(2)).sum::<f64>();
    let df2 = n1 + n2 - 2.0;
    let (statistic, p_value) = if within > 0.0 {
        let w = df2 * between / within;
        let dist = FisherSnedecor::new(1.0, df2).map_err(|e| Error::InvalidInput(e.to_string()))?;
        (w, clamp_p(dist.sf(w)))
    } else if between == 0.0 {
        (0.0, 1.0)
    } else {
        (f64::INFINITY, 0.0)
    };
    Ok(TestResult {
        statistic,
        p_value,
        method: Method::Levene,
        n1: a.len(),
        n2: b.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn equal_samples() {
        let a = [1.0, 2.0, 4.0, 8.0];
        let r = t_test(&a, &a, TVariant::Student).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
        let l = levene(&a, &a).unwrap();
        assert_eq!((l.statistic, l.p_value), (0.0, 1.0));
    }

    #[test]
    fn pooled_by_hand() {
        // both variances 1/3, pooled 1/3, se^2 = 1/6, t = -10 sqrt 6
        let r = t_test(&[0.0, 0.0, 1.0, 1.0], &[10.0, 10.0, 11.0, 11.0], TVariant::Student).unwrap();
        assert!((r.statistic + 10.0 * 6f64.sqrt()).abs() < 1e-12);
        assert!(r.p_value < 1e-6);
        assert_eq!(r.method, Method::T);
    }

    #[test]
    fn constant_samples_convention() {
        let r = t_test(&[2.0; 3], &[2.0; 5], TVariant::Welch).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
        let r = t_test(&[2.0; 3], &[3.0; 5], TVariant::Welch).unwrap();
        assert_eq!(r.p_value, 0.0);
        assert!(r.statistic < 0.0);
    }

    #[test]
    fn too_small() {
        assert!(t_test(&[1.0], &[1.0, 2.0], TVariant::Student).is_err());
        assert!(levene(&[1.0, 2.0], &[3.0]).is_err());
    }

    #[test]
    fn levene_detects_variance_ratio_25() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a: Vec<f64> = Normal::new(0.0, 1.0).unwrap().sample_iter(&mut rng).take(50).collect();
        let b: Vec<f64> = Normal::new(0.0, 5.0).unwrap().sample_iter(&mut rng).take(50).collect();
        let r = levene(&a, &b).unwrap();
        assert!(r.p_value < 0.01, "p = {}", r.p_value);
        let s = levene(&b, &a).unwrap();
        assert_eq!((r.statistic, r.p_value), (s.statistic, s.p_value));
    }

    #[test]
    fn welch_equals_student_for_balanced_equal_variances() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [11.0, 12.0, 13.0, 14.0];
        let s = t_test(&a, &b, TVariant::Student).unwrap();
        let w = t_test(&a, &b, TVariant::Welch).unwrap();
        assert_eq!(s.statistic, w.statistic);
    }
}
