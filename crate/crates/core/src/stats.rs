//! Correlations, bootstrap intervals, paired t-tests, Bonferroni correction,
//! stratified-entropy prompt sampling, and calibration metrics.

use rand::seq::index;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{kahan_sum, student_t_two_sided_p};
use crate::rng;

pub fn mean(xs: &[f64]) -> f64 {
    kahan_sum(xs.iter().copied()) / xs.len() as f64
}

/// Sample standard deviation (divisor n − 1).
pub fn sample_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let ss = kahan_sum(xs.iter().map(|x| (x - m) * (x - m)));
    (ss / (xs.len() as f64 - 1.0)).sqrt()
}

fn check_pair(x: &[f64], y: &[f64], what: &str) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "{what}: length mismatch ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "{what}: need at least 3 points, got {}",
            x.len()
        )));
    }
    Ok(())
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y, "pearson")?;
    let mx = mean(x);
    let my = mean(y);
    let sxy = kahan_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let sxx = kahan_sum(x.iter().map(|a| (a - mx) * (a - mx)));
    let syy = kahan_sum(y.iter().map(|b| (b - my) * (b - my)));
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate(
            "correlation undefined for a constant series".into(),
        ));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Ranks starting at 1, ties receive the average of the ranks they span.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (Pearson on average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y, "spearman")?;
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Percentile bootstrap interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    pub lo: f64,
    /// Statistic evaluated on the original sample.
    pub estimate: f64,
    pub hi: f64,
}

pub const DEFAULT_RESAMPLES: usize = 10_000;

/// 95% percentile bootstrap interval of `statistic` over `samples`.
///
/// Resample `r` draws from ChaCha stream `r` of `seed`, so the result does not
/// depend on how resamples are spread over threads.
pub fn bootstrap_ci<T, F>(samples: &[T], statistic: F, n_resamples: usize, seed: u64) -> Result<BootstrapCi>
where
    T: Clone + Sync,
    F: Fn(&[T]) -> f64 + Sync,
{
    bootstrap_ci_level(samples, statistic, n_resamples, seed, 0.95)
}

pub fn bootstrap_ci_level<T, F>(
    samples: &[T],
    statistic: F,
    n_resamples: usize,
    seed: u64,
    level: f64,
) -> Result<BootstrapCi>
where
    T: Clone + Sync,
    F: Fn(&[T]) -> f64 + Sync,
{
    let n = samples.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "bootstrap needs at least 2 samples, got {n}"
        )));
    }
    if n_resamples == 0 {
        return Err(Error::InvalidInput("n_resamples must be positive".into()));
    }
    let estimate = statistic(samples);
    let mut reps: Vec<f64> = (0..n_resamples)
        .into_par_iter()
        .map(|r| {
            let mut g = rng::stream(seed, r as u64);
            let draw: Vec<T> = (0..n).map(|_| samples[g.random_range(0..n)].clone()).collect();
            statistic(&draw)
        })
        .collect();
    reps.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok(BootstrapCi {
        lo: quantile_sorted(&reps, alpha),
        estimate,
        hi: quantile_sorted(&reps, 1.0 - alpha),
    })
}

/// Linear-interpolated quantile of sorted data (Hyndman–Fan type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, q)
}

/// Outcome of a hypothesis test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub corrected_p: f64,
    pub n: usize,
    pub method: String,
}

impl TestResult {
    /// Apply a Bonferroni factor of `m` comparisons.
    pub fn corrected(mut self, m: usize) -> Self {
        self.corrected_p = bonferroni(self.p_value, m);
        self
    }
}

/// Two-sided paired t-test on `a − b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    check_pair(a, b, "paired t-test")?;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len();
    let sd = sample_std(&d);
    if sd == 0.0 || !sd.is_finite() {
        return Err(Error::Degenerate(
            "paired differences have zero variance".into(),
        ));
    }
    let t = mean(&d) / (sd / (n as f64).sqrt());
    let p = student_t_two_sided_p(t, (n - 1) as f64);
    Ok(TestResult {
        statistic: t,
        p_value: p,
        corrected_p: p,
        n,
        method: "paired_t".into(),
    })
}

pub fn bonferroni(p: f64, m: usize) -> f64 {
    (p * m.max(1) as f64).min(1.0)
}

pub fn bonferroni_all(ps: &[f64], m: usize) -> Vec<f64> {
    ps.iter().map(|&p| bonferroni(p, m)).collect()
}

/// Prompts chosen by stratified-entropy sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedSample {
    /// Candidate ids per stratum, lowest-entropy stratum first, each in
    /// ascending entropy rank.
    pub strata: Vec<Vec<String>>,
    /// Selected ids per stratum, in ascending entropy rank.
    pub selected: Vec<Vec<String>>,
    pub per_stratum: usize,
    pub seed: u64,
}

impl StratifiedSample {
    pub fn selected_ids(&self) -> Vec<String> {
        self.selected.iter().flatten().cloned().collect()
    }
}

/// Partition candidates into `n_strata` equal-count rank buckets by entropy
/// and draw `per_stratum` prompts uniformly without replacement from each.
///
/// Equal entropies keep their input order. When the candidate count is not
/// a multiple of `n_strata`, bucket boundaries are `⌊i·n / n_strata⌋`.
pub fn stratify_by_entropy(
    candidates: &[(String, f64)],
    n_strata: usize,
    per_stratum: usize,
    seed: u64,
) -> Result<StratifiedSample> {
    if n_strata == 0 || per_stratum == 0 {
        return Err(Error::InvalidInput("strata and per-stratum counts must be positive".into()));
    }
    let n = candidates.len();
    if n < n_strata * per_stratum {
        return Err(Error::InvalidInput(format!(
            "{n} candidates cannot fill {n_strata} strata of {per_stratum}"
        )));
    }
    if let Some((id, _)) = candidates.iter().find(|(_, h)| !h.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite entropy for {id}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    // stable: ties keep input order
    order.sort_by(|&a, &b| candidates[a].1.total_cmp(&candidates[b].1));
    let mut strata = Vec::with_capacity(n_strata);
    let mut selected = Vec::with_capacity(n_strata);
    for s in 0..n_strata {
        let lo = s * n / n_strata;
        let hi = (s + 1) * n / n_strata;
        let bucket: Vec<usize> = order[lo..hi].to_vec();
        if bucket.len() < per_stratum {
            return Err(Error::InvalidInput(format!(
                "stratum {s} has {} candidates, fewer than {per_stratum}",
                bucket.len()
            )));
        }
        let mut g = rng::stream(seed, s as u64);
        let mut picks = index::sample(&mut g, bucket.len(), per_stratum).into_vec();
        picks.sort_unstable();
        strata.push(bucket.iter().map(|&i| candidates[i].0.clone()).collect());
        selected.push(picks.iter().map(|&p| candidates[bucket[p]].0.clone()).collect());
    }
    Ok(StratifiedSample {
        strata,
        selected,
        per_stratum,
        seed,
    })
}

/// Agreement between model entropies and exact Bayesian entropies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub mae_bits: f64,
    pub spearman_rho: Option<f64>,
    pub pearson_r: Option<f64>,
    pub n: usize,
}

/// Both inputs are `(prompt id, entropy bits)` lists that must list the same
/// ids in the same order. Correlations are `None` when either side is
/// constant.
pub fn calibration(model: &[(String, f64)], bayes: &[(String, f64)]) -> Result<Calibration> {
    if model.len() != bayes.len() {
        return Err(Error::Misaligned(format!(
            "{} model entropies vs {} Bayesian entropies",
            model.len(),
            bayes.len()
        )));
    }
    if let Some(((a, _), (b, _))) = model.iter().zip(bayes).find(|((a, _), (b, _))| a != b) {
        return Err(Error::Misaligned(format!("{a} paired with {b}")));
    }
    if model.is_empty() {
        return Err(Error::InvalidInput("calibration of an empty set".into()));
    }
    let x: Vec<f64> = model.iter().map(|(_, h)| *h).collect();
    let y: Vec<f64> = bayes.iter().map(|(_, h)| *h).collect();
    let mae = kahan_sum(x.iter().zip(&y).map(|(a, b)| (a - b).abs())) / x.len() as f64;
    Ok(Calibration {
        mae_bits: mae,
        spearman_rho: spearman(&x, &y).ok(),
        pearson_r: pearson(&x, &y).ok(),
        n: x.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn spearman_extremes() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [2.0, 4.0, 8.0, 16.0, 32.0];
        assert_relative_eq!(spearman(&x, &y).unwrap(), 1.0);
        let r: Vec<f64> = y.iter().rev().copied().collect();
        assert_relative_eq!(spearman(&x, &r).unwrap(), -1.0);
    }

    #[test]
    fn constant_input_is_an_error() {
        let x = [1.0, 1.0, 1.0];
        let y = [1.0, 2.0, 3.0];
        assert!(matches!(spearman(&x, &y), Err(Error::Degenerate(_))));
        assert!(matches!(pearson(&y, &x), Err(Error::Degenerate(_))));
        assert!(spearman(&x[..2], &y[..2]).is_err());
    }

    #[test]
    fn average_ranks_for_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn pearson_linear() {
        let x = [0.0, 1.0, 2.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        assert_relative_eq!(pearson(&x, &y).unwrap(), 1.0, epsilon = 1e-15);
        let z: Vec<f64> = x.iter().map(|v| -0.5 * v).collect();
        assert_relative_eq!(pearson(&x, &z).unwrap(), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn bootstrap_constant_sample() {
        let ci = bootstrap_ci(&[2.5; 10], mean, 500, 3).unwrap();
        assert_eq!((ci.lo, ci.estimate, ci.hi), (2.5, 2.5, 2.5));
        assert!(bootstrap_ci(&[1.0], mean, 10, 0).is_err());
    }

    #[test]
    fn bootstrap_is_seeded() {
        let xs: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let a = bootstrap_ci(&xs, mean, 2000, 11).unwrap();
        let b = bootstrap_ci(&xs, mean, 2000, 11).unwrap();
        assert_eq!(a, b);
        let c = bootstrap_ci(&xs, mean, 2000, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn bonferroni_cases() {
        assert_relative_eq!(bonferroni(0.001, 10), 0.01, epsilon = 1e-18);
        assert_eq!(bonferroni(0.5, 3), 1.0);
        let ps = [0.01, 0.2, 0.04];
        let v = bonferroni_all(&ps, 3);
        for (p, c) in ps.iter().zip(&v) {
            assert_eq!(*c, bonferroni(*p, 3));
        }
    }

    #[test]
    fn identical_samples_fail_t_test() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert!(matches!(paired_t_test(&a, &a), Err(Error::Degenerate(_))));
    }

    #[test]
    fn t_statistic_antisymmetric() {
        let a = [1.0, 2.5, 2.9, 4.1, 5.0];
        let b = [0.5, 2.0, 3.1, 3.0, 4.4];
        let ab = paired_t_test(&a, &b).unwrap();
        let ba = paired_t_test(&b, &a).unwrap();
        assert_eq!(ab.statistic, -ba.statistic);
        assert_relative_eq!(ab.p_value, ba.p_value, epsilon = 1e-15);
    }

    #[test]
    fn stratify_all_when_exact() {
        let c: Vec<(String, f64)> = (0..75).map(|i| (format!("p{i}"), (i * 7 % 75) as f64)).collect();
        let s = stratify_by_entropy(&c, 5, 15, 1).unwrap();
        let mut got = s.selected_ids();
        got.sort();
        let mut all: Vec<String> = c.iter().map(|(id, _)| id.clone()).collect();
        all.sort();
        assert_eq!(got, all);
    }

    #[test]
    fn stratify_rejects_short_pool() {
        let c: Vec<(String, f64)> = (0..74).map(|i| (format!("p{i}"), i as f64)).collect();
        assert!(stratify_by_entropy(&c, 5, 15, 1).is_err());
    }

    #[test]
    fn calibration_offsets() {
        let ids: Vec<String> = (0..5).map(|i| format!("q{i}")).collect();
        let bayes: Vec<(String, f64)> = ids.iter().zip([1.0, 0.9, 0.8, 0.6, 0.5]).map(|(i, h)| (i.clone(), h)).collect();
        let same = calibration(&bayes, &bayes).unwrap();
        assert_eq!(same.mae_bits, 0.0);
        let shifted: Vec<(String, f64)> = bayes.iter().map(|(i, h)| (i.clone(), h + 0.25)).collect();
        let c = calibration(&shifted, &bayes).unwrap();
        assert_relative_eq!(c.mae_bits, 0.25, epsilon = 1e-12);
        assert_relative_eq!(c.spearman_rho.unwrap(), 1.0);
        let mut swapped = bayes.clone();
        swapped.swap(0, 1);
        assert!(matches!(calibration(&swapped, &bayes), Err(Error::Misaligned(_))));
    }
}
