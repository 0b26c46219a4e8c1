//! Distances between distributions, regression and bootstrap helpers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

/// `0.5 * sum |p_k - q_k|`, missing entries counting as zero.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    let len = p.len().max(q.len());
    let at = |v: &[f64], k: usize| v.get(k).copied().unwrap_or(0.0);
    0.5 * (0..len).map(|k| (at(p, k) - at(q, k)).abs()).sum::<f64>()
}

/// Relative frequencies of `0..=max(values)`.
pub fn empirical_pmf(values: &[u32]) -> Vec<f64> {
    let max = values.iter().copied().max().unwrap_or(0) as usize;
    let mut counts = vec![0u64; max + 1];
    for &v in values {
        counts[v as usize] += 1;
    }
    let total = values.len() as f64;
    counts.into_iter().map(|c| c as f64 / total).collect()
}

/// Kolmogorov distance between an integer-valued pmf and a continuous law.
///
/// The continuous CDF is read at `k + 1/2` (continuity correction), so a
/// lattice variable that is exactly a discretized version of the law has
/// distance zero.
pub fn ks_lattice(pmf: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut acc = 0.0;
    let mut worst: f64 = cdf(-0.5).abs();
    for (k, &p) in pmf.iter().enumerate() {
        acc += p;
        worst = worst.max((acc - cdf(k as f64 + 0.5)).abs());
    }
    worst
}

pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// `(x / s^2) exp(-x^2 / (2 s^2))` for `x >= 0`.
pub fn rayleigh_pdf(x: f64, sigma: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    let s2 = sigma * sigma;
    x / s2 * (-x * x / (2.0 * s2)).exp()
}

pub fn rayleigh_cdf(x: f64, sigma: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    1.0 - (-x * x / (2.0 * sigma * sigma)).exp()
}

/// Mean and (population) variance of a pmf on `0, 1, 2, ..`.
pub fn pmf_moments(pmf: &[f64]) -> (f64, f64) {
    let mean: f64 = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
    let second: f64 = pmf.iter().enumerate().map(|(k, p)| (k * k) as f64 * p).sum();
    (mean, second - mean * mean)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares `y = intercept + slope * x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    LinearFit {
        slope,
        intercept: my - slope * mx,
        r2,
    }
}

/// Log-log slope of `y` against `x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> LinearFit {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlopeEstimate {
    pub slope: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Log-log slope of the group means with a percentile bootstrap interval.
///
/// `groups[i]` holds the trial values observed at `x[i]`; each replicate
/// resamples trials within every group.
pub fn bootstrap_loglog_slope(
    x: &[f64],
    groups: &[Vec<f64>],
    reps: usize,
    level: f64,
    seed: u64,
) -> SlopeEstimate {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let means: Vec<f64> = groups.iter().map(|g| mean(g)).collect();
    let slope = loglog_slope(x, &means).slope;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slopes: Vec<f64> = (0..reps)
        .map(|_| {
            let m: Vec<f64> = groups
                .iter()
                .map(|g| {
                    let s: f64 = (0..g.len()).map(|_| g[rng.gen_range(0..g.len())]).sum();
                    s / g.len() as f64
                })
                .collect();
            loglog_slope(x, &m).slope
        })
        .collect();
    slopes.sort_by(f64::total_cmp);
    let q = |f: f64| {
        if slopes.is_empty() {
            return slope;
        }
        let idx = ((slopes.len() - 1) as f64 * f).round() as usize;
        slopes[idx]
    };
    let tail = (1.0 - level) / 2.0;
    SlopeEstimate {
        slope,
        lo: q(tail),
        hi: q(1.0 - tail),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rayleigh_density_value() {
        // sigma^2 = 2 gives x/2 exp(-x^2/4)
        let v = rayleigh_pdf(1.0, 2f64.sqrt());
        assert!((v - 0.5 * (-0.25f64).exp()).abs() < 1e-15);
        assert!((rayleigh_cdf(1e9, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ks_of_discretized_law_is_zero() {
        let cdf = |x: f64| normal_cdf((x - 30.0) / 3.0);
        let mut pmf: Vec<f64> = (0..60).map(|k| cdf(k as f64 + 0.5) - cdf(k as f64 - 0.5)).collect();
        pmf[0] = cdf(0.5);
        assert!(ks_lattice(&pmf, cdf) < 1e-12);
        let shifted: Vec<f64> = (0..60).map(|k| cdf(k as f64 - 1.5) - cdf(k as f64 - 2.5)).collect();
        assert!(ks_lattice(&shifted, cdf) > 0.1);
    }

    #[test]
    fn fits() {
        let f = linear_fit(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]);
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        let x = [100.0, 200.0, 400.0];
        let groups: Vec<Vec<f64>> = x.iter().map(|v: &f64| vec![v.powi(3), 1.1 * v.powi(3)]).collect();
        let s = bootstrap_loglog_slope(&x, &groups, 200, 0.95, 1);
        assert!((s.slope - 3.0).abs() < 1e-9);
        assert!(s.lo <= s.slope + 0.05 && s.hi >= s.slope - 0.05);
        assert_eq!(s, bootstrap_loglog_slope(&x, &groups, 200, 0.95, 1));
    }

    #[test]
    fn moments() {
        let (m, v) = pmf_moments(&[0.25, 0.5, 0.25]);
        assert!((m - 1.0).abs() < 1e-15 && (v - 0.5).abs() < 1e-15);
        assert_eq!(empirical_pmf(&[0, 2, 2, 1]), vec![0.25, 0.25, 0.5]);
    }

    proptest! {
        #[test]
        fn tv_is_a_bounded_metric(a in proptest::collection::vec(0.0f64..1.0, 1..20),
                                  b in proptest::collection::vec(0.0f64..1.0, 1..20)) {
            let norm = |v: Vec<f64>| { let s: f64 = v.iter().sum::<f64>().max(1e-12); v.into_iter().map(|x| x / s).collect::<Vec<_>>() };
            let (p, q) = (norm(a), norm(b));
            let d = total_variation(&p, &q);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&d));
            prop_assert!((d - total_variation(&q, &p)).abs() < 1e-15);
            prop_assert!(total_variation(&p, &p) == 0.0);
        }
    }
}
