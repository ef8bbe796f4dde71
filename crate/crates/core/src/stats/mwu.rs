use statrs::function::erf::erfc;

use super::{clamp_p, Method, TestResult};

/// Largest combined sample size that gets an exact p-value.
pub const EXACT_LIMIT: usize = 12;

/// Midranks (1-based) of the pooled sample, doubled so ties stay integral.
fn doubled_midranks(pooled: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let n = pooled.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0u64; n];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && pooled[order[j]] == pooled[order[i]] {
            j += 1;
        }
        // positions i+1 ..= j share rank (i + 1 + j) / 2
        let r2 = (i + 1 + j) as u64;
        for &k in &order[i..j] {
            ranks[k] = r2;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

/// Two-sided exact p: share of the `C(N, n1)` equally likely rank subsets
/// whose sum deviates from its mean at least as much as the observed one.
/// Counts are built by a subset-sum recursion over the doubled ranks.
fn exact_p(ranks2: &[u64], n1: usize, observed2: u64) -> f64 {
    let total2: u64 = ranks2.iter().sum();
    let max = total2 as usize;
    // counts[m][s]: subsets of size m with doubled rank sum s
    let mut counts = vec![vec![0f64; max + 1]; n1 + 1];
    counts[0][0] = 1.0;
    for &r in ranks2 {
        let r = r as usize;
        for m in (1..=n1).rev() {
            let (lower, upper) = counts.split_at_mut(m);
            let (prev, cur) = (&lower[m - 1], &mut upper[0]);
            for s in (r..=max).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    let n = ranks2.len() as u64;
    // E[2W] = n1 (N + 1), an integer
    let centre = n1 as u64 * (n + 1);
    let dev = |s: u64| s.abs_diff(centre);
    let observed = dev(observed2);
    let row = &counts[n1];
    let all: f64 = row.iter().sum();
    let extreme: f64 = row
        .iter()
        .enumerate()
        .filter(|&(s, _)| dev(s as u64) >= observed)
        .map(|(_, c)| c)
        .sum();
    extreme / all
}

/// Wilcoxon rank-sum test. The statistic is `W`, the midrank sum of `a`;
/// `U = W - n1 (n1 + 1) / 2`. Exact when `n1 + n2 <= EXACT_LIMIT`, otherwise
/// the normal approximation with tie and continuity corrections. Two-sided.
///
/// # Panics
/// If either sample is empty.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> TestResult {
    assert!(
        !a.is_empty() && !b.is_empty(),
        "rank-sum test needs two non-empty samples"
    );
    let (n1, n2) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks2, ties) = doubled_midranks(&pooled);
    let w2: u64 = ranks2[..n1].iter().sum();
    let w = w2 as f64 / 2.0;
    let n = (n1 + n2) as f64;

    let p_value = if n1 + n2 <= EXACT_LIMIT {
        exact_p(&ranks2, n1, w2)
    } else {
        let u = w - (n1 * (n1 + 1)) as f64 / 2.0;
        let mu = (n1 * n2) as f64 / 2.0;
        let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0));
        let var = (n1 * n2) as f64 / 12.0 * ((n + 1.0) - tie_term);
        if var <= 0.0 {
            1.0
        } else {
            let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
            erfc(z / std::f64::consts::SQRT_2)
        }
    };
    TestResult {
        statistic: w,
        p_value: clamp_p(p_value),
        method: Method::Mwu,
        n1,
        n2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_triples() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]);
        assert_eq!(r.statistic, 6.0); // U = 0
        assert!((r.p_value - 0.1).abs() < 1e-15);
        let swapped = mann_whitney_u(&[4.0, 5.0, 6.0], &[1.0, 2.0, 3.0]);
        assert_eq!(swapped.statistic, 15.0);
        assert_eq!(swapped.p_value, r.p_value);
    }

    #[test]
    fn identical_samples_give_p_one() {
        let x = [0.3, 1.1, 2.4, 2.4, 5.0, 7.7, 8.0];
        assert_eq!(mann_whitney_u(&x, &x).p_value, 1.0);
        let big: Vec<f64> = (0..30).map(|i| (i % 11) as f64).collect();
        let r = mann_whitney_u(&big, &big);
        assert!(r.p_value > 0.99);
    }

    #[test]
    fn all_tied() {
        assert_eq!(mann_whitney_u(&[1.0; 20], &[1.0; 15]).p_value, 1.0);
        assert_eq!(mann_whitney_u(&[1.0; 4], &[1.0; 5]).p_value, 1.0);
    }

    #[test]
    fn midranks_are_doubled() {
        let (r, ties) = doubled_midranks(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(r, vec![7, 2, 7, 4]);
        assert_eq!(ties, vec![2]);
    }

    #[test]
    fn normal_approximation_against_known_value() {
        // n1 = n2 = 10 without ties, full separation: U = 0, mu = 50,
        // var = 175, z = 49.5 / sqrt(175)
        let a: Vec<f64> = (0..10).map(f64::from).collect();
        let b: Vec<f64> = (10..20).map(f64::from).collect();
        let r = mann_whitney_u(&a, &b);
        let z = 49.5 / 175f64.sqrt();
        assert!((r.p_value - erfc(z / std::f64::consts::SQRT_2)).abs() < 1e-15);
        assert_eq!(r.statistic, 55.0);
    }
}
