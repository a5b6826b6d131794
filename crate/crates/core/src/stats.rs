//! Small statistical toolkit used by the estimators and the acceptance suite.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Total variation distance `½ Σ |a - b|` over the union of supports.
pub fn tv_distance<K: Ord>(a: &BTreeMap<K, f64>, b: &BTreeMap<K, f64>) -> f64 {
    let mut sum = 0.0;
    for (k, pa) in a {
        sum += (pa - b.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, pb) in b {
        if !a.contains_key(k) {
            sum += pb.abs();
        }
    }
    0.5 * sum
}

/// Normalized frequencies.
pub fn normalize_counts<K: Ord + Clone>(counts: &BTreeMap<K, u64>) -> BTreeMap<K, f64> {
    let n: u64 = counts.values().sum();
    counts.iter().map(|(k, &c)| (k.clone(), c as f64 / n as f64)).collect()
}

pub fn binomial_se(p: f64, n: u64) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Upper tail probability of a standard normal.
pub fn normal_sf(z: f64) -> f64 {
    Normal::standard().sf(z)
}

/// One-sided p-value for `H1: p2 > p1` with a pooled two-proportion z statistic.
pub fn two_proportion_p(k1: u64, n1: u64, k2: u64, n2: u64) -> f64 {
    let (p1, p2) = (k1 as f64 / n1 as f64, k2 as f64 / n2 as f64);
    let pool = (k1 + k2) as f64 / (n1 + n2) as f64;
    let se = (pool * (1.0 - pool) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    if se == 0.0 {
        return if p2 > p1 { 0.0 } else { 1.0 };
    }
    normal_sf((p2 - p1) / se)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Two-sample chi-square homogeneity test on the `top_k` categories with the
/// largest pooled count; all other categories are lumped into one bin.
pub fn chi_square_homogeneity<K: Ord + Clone>(a: &BTreeMap<K, u64>, b: &BTreeMap<K, u64>, top_k: usize) -> ChiSquareTest {
    let keys: BTreeSet<&K> = a.keys().chain(b.keys()).collect();
    let mut pooled: Vec<(&K, u64)> = keys
        .into_iter()
        .map(|k| (k, a.get(k).copied().unwrap_or(0) + b.get(k).copied().unwrap_or(0)))
        .collect();
    // stable sort keeps key order among ties
    pooled.sort_by(|x, y| y.1.cmp(&x.1));
    let top: Vec<&K> = pooled.iter().take(top_k).map(|(k, _)| *k).collect();
    let na: u64 = a.values().sum();
    let nb: u64 = b.values().sum();
    let mut rows: Vec<(u64, u64)> = top
        .iter()
        .map(|k| (a.get(*k).copied().unwrap_or(0), b.get(*k).copied().unwrap_or(0)))
        .collect();
    let (ta, tb) = rows.iter().fold((0, 0), |(x, y), r| (x + r.0, y + r.1));
    if na > ta || nb > tb {
        rows.push((na - ta, nb - tb));
    }
    let n = (na + nb) as f64;
    let mut stat = 0.0;
    for &(oa, ob) in &rows {
        let tot = (oa + ob) as f64;
        let ea = tot * na as f64 / n;
        let eb = tot * nb as f64 / n;
        if ea > 0.0 {
            stat += (oa as f64 - ea).powi(2) / ea;
        }
        if eb > 0.0 {
            stat += (ob as f64 - eb).powi(2) / eb;
        }
    }
    let df = rows.len().saturating_sub(1).max(1);
    let p_value = ChiSquared::new(df as f64).map(|d| d.sf(stat)).unwrap_or(f64::NAN);
    ChiSquareTest { statistic: stat, df, p_value }
}

/// Wald–Wolfowitz runs test on the signs of `x` (zeros dropped).
/// Two-sided p-value from the normal approximation.
pub fn runs_test(x: &[f64]) -> f64 {
    let signs: Vec<bool> = x.iter().filter(|v| **v != 0.0).map(|v| *v > 0.0).collect();
    let n1 = signs.iter().filter(|s| **s).count() as f64;
    let n2 = signs.len() as f64 - n1;
    if n1 == 0.0 || n2 == 0.0 {
        return if signs.len() < 2 { 1.0 } else { 0.0 };
    }
    let runs = 1 + signs.windows(2).filter(|w| w[0] != w[1]).count();
    let n = n1 + n2;
    let mean = 2.0 * n1 * n2 / n + 1.0;
    let var = 2.0 * n1 * n2 * (2.0 * n1 * n2 - n) / (n * n * (n - 1.0));
    if var <= 0.0 {
        return 1.0;
    }
    let z = (runs as f64 - mean) / var.sqrt();
    2.0 * normal_sf(z.abs())
}

#[derive(Clone, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub residuals: Vec<f64>,
}

/// Least-squares line `y = a + b x`. With weights `w_i = 1 / var(y_i)` the
/// slope error is the known-variance one; without weights it is estimated
/// from the residuals.
pub fn line_fit(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> LineFit {
    let n = x.len();
    let w: Vec<f64> = weights.map(<[f64]>::to_vec).unwrap_or_else(|| vec![1.0; n]);
    let sw: f64 = w.iter().sum();
    let xm = w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() / sw;
    let ym = w.iter().zip(y).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(x).map(|(w, x)| w * (x - xm).powi(2)).sum();
    let sxy: f64 = w.iter().zip(x).zip(y).map(|((w, x), y)| w * (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let residuals: Vec<f64> = x.iter().zip(y).map(|(x, y)| y - intercept - slope * x).collect();
    let slope_se = if weights.is_some() {
        (1.0 / sxx).sqrt()
    } else if n > 2 {
        let rss: f64 = residuals.iter().map(|r| r * r).sum();
        (rss / (n as f64 - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    LineFit { slope, intercept, slope_se, residuals }
}

/// Draws a multinomial resample of the same total size.
pub fn resample_counts<R: Rng + ?Sized>(counts: &[u64], rng: &mut R) -> Vec<u64> {
    let total: u64 = counts.iter().sum();
    let mut cum = Vec::with_capacity(counts.len());
    let mut acc = 0u64;
    for &c in counts {
        acc += c;
        cum.push(acc);
    }
    let mut out = vec![0u64; counts.len()];
    for _ in 0..total {
        let u = rng.random_range(0..total);
        let i = cum.partition_point(|&c| c <= u);
        out[i] += 1;
    }
    out
}

/// Empirical quantile with linear interpolation; sorts in place.
pub fn quantile(values: &mut [f64], q: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    if values.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    values[lo] + (values[hi] - values[lo]) * (pos - lo as f64)
}

/// A point estimate with a two-sided interval.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Interval {
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    /// Basic (reverse percentile) bootstrap interval `[2θ - q_hi, 2θ - q_lo]`,
    /// clamped below at `floor`. Unlike the percentile interval it corrects for
    /// a bootstrap distribution shifted away from the estimate, which is the
    /// usual situation for plug-in distances such as TV.
    pub fn basic_bootstrap(estimate: f64, boot: &mut [f64], level: f64, floor: f64) -> Self {
        let a = (1.0 - level) / 2.0;
        let q_lo = quantile(boot, a);
        let q_hi = quantile(boot, 1.0 - a);
        Interval { estimate, lo: (2.0 * estimate - q_hi).max(floor), hi: (2.0 * estimate - q_lo).max(floor) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streams::stream;

    #[test]
    fn basic_bootstrap_reflects_shift() {
        let mut boot: Vec<f64> = (0..=100).map(|k| 0.2 + k as f64 * 0.001).collect();
        let ci = Interval::basic_bootstrap(0.15, &mut boot, 0.9, 0.0);
        assert!((ci.lo - (0.3 - 0.295)).abs() < 1e-12);
        assert!((ci.hi - (0.3 - 0.205)).abs() < 1e-12);
        let clamped = Interval::basic_bootstrap(0.01, &mut boot, 0.9, 0.0);
        assert_eq!(clamped.lo, 0.0);
    }

    #[test]
    fn tv_examples() {
        let a: BTreeMap<u8, f64> = [(1, 0.5), (2, 0.5)].into();
        let b: BTreeMap<u8, f64> = [(2, 0.5), (3, 0.5)].into();
        assert!((tv_distance(&a, &b) - 0.5).abs() < 1e-15);
        assert_eq!(tv_distance(&a, &a), 0.0);
    }

    #[test]
    fn chi_square_detects_difference() {
        let a: BTreeMap<u8, u64> = [(1, 500), (2, 500)].into();
        let same: BTreeMap<u8, u64> = [(1, 505), (2, 495)].into();
        let diff: BTreeMap<u8, u64> = [(1, 600), (2, 400)].into();
        assert!(chi_square_homogeneity(&a, &same, 20).p_value > 0.5);
        assert!(chi_square_homogeneity(&a, &diff, 20).p_value < 1e-4);
        // 2x2 table: statistic by hand = 20.2020...
        let t = chi_square_homogeneity(&a, &diff, 20);
        assert_eq!(t.df, 1);
        assert!((t.statistic - 20.0 * 1000.0 / 990.0).abs() < 1e-9);
    }

    #[test]
    fn runs_test_behaviour() {
        let alternating: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!(runs_test(&alternating) < 1e-6);
        let trend: Vec<f64> = (0..40).map(|i| if i < 20 { 1.0 } else { -1.0 }).collect();
        assert!(runs_test(&trend) < 1e-6);
        let mut rng = stream(4, &[]);
        let noise: Vec<f64> = (0..200).map(|_| rng.random::<f64>() - 0.5).collect();
        assert!(runs_test(&noise) > 0.01);
    }

    #[test]
    fn exact_line() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|x| 2.0 - 0.7 * x).collect();
        let f = line_fit(&x, &y, None);
        assert!((f.slope + 0.7).abs() < 1e-12);
        assert!((f.intercept - 2.0).abs() < 1e-12);
    }

    #[test]
    fn resample_preserves_total() {
        let mut rng = stream(1, &[]);
        let r = resample_counts(&[5, 0, 10, 1], &mut rng);
        assert_eq!(r.iter().sum::<u64>(), 16);
        assert_eq!(r[1], 0);
    }

    #[test]
    fn two_proportion_direction() {
        assert!(two_proportion_p(100, 1000, 200, 1000) < 1e-6);
        assert!(two_proportion_p(200, 1000, 100, 1000) > 0.99);
    }

    #[test]
    fn quantile_interpolates() {
        let mut v = vec![3.0, 1.0, 2.0, 4.0];
        assert_eq!(quantile(&mut v, 0.0), 1.0);
        assert_eq!(quantile(&mut v, 1.0), 4.0);
        assert!((quantile(&mut v, 0.5) - 2.5).abs() < 1e-15);
    }
}
