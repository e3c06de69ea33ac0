//! Monte Carlo estimates, the two-sample Kolmogorov–Smirnov test, and exit
//! statistics of sampled paths.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::speed_measure::Interval;
use crate::time_change::SamplePath;

/// Confidence multiplier used for every acceptance gate.
pub const Z_MULTIPLIER: f64 = 3.0;

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + comp
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub se: f64,
    pub ci_half_width: f64,
}

impl MCEstimate {
    /// `|mean − target| ≤ ci_half_width + allowance`.
    pub fn agrees_with(&self, target: f64, allowance: f64) -> bool {
        (self.mean - target).abs() <= self.ci_half_width + allowance
    }
}

pub fn mc_mean(samples: &[f64]) -> Result<MCEstimate> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientSample(format!("need at least 2 samples, got {n}")));
    }
    let mean = compensated_sum(samples.iter().copied()) / n as f64;
    let ss = compensated_sum(samples.iter().map(|x| (x - mean) * (x - mean)));
    let variance = ss / (n - 1) as f64;
    let se = (variance / n as f64).sqrt();
    Ok(MCEstimate { n, mean, variance, se, ci_half_width: Z_MULTIPLIER * se })
}

/// Estimate of a probability from `hits` successes in `n` trials.
pub fn mc_fraction(hits: usize, n: usize) -> Result<MCEstimate> {
    if n < 2 {
        return Err(Error::InsufficientSample(format!("need at least 2 trials, got {n}")));
    }
    let mean = hits as f64 / n as f64;
    let variance = mean * (1.0 - mean) * n as f64 / (n - 1) as f64;
    let se = (variance / n as f64).sqrt();
    Ok(MCEstimate { n, mean, variance, se, ci_half_width: Z_MULTIPLIER * se })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KSResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
}

pub const KS_MIN_SAMPLE: usize = 50;

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KSResult> {
    let (n1, n2) = (a.len(), b.len());
    if n1 < KS_MIN_SAMPLE || n2 < KS_MIN_SAMPLE {
        return Err(Error::InsufficientSample(format!(
            "two-sample KS needs at least {KS_MIN_SAMPLE} values per sample, got {n1} and {n2}"
        )));
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(Error::Domain("KS samples must not contain NaN".into()));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < n1 && j < n2 {
        let v = xs[i].min(ys[j]);
        while i < n1 && xs[i] <= v {
            i += 1;
        }
        while j < n2 && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n1 as f64 - j as f64 / n2 as f64).abs());
    }
    let ne = (n1 as f64 * n2 as f64) / (n1 + n2) as f64;
    let p_value = kolmogorov_sf(ne.sqrt() * d);
    Ok(KSResult { statistic: d, p_value, n1, n2 })
}

/// Survival function of the Kolmogorov distribution, `P(K > λ)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // CDF via the Jacobi theta form, which converges fast for small λ.
        let x = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut s = 0.0;
        for k in (1..=9).step_by(2) {
            s += (x * (k * k) as f64).exp();
        }
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * s;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        for k in 1..=100i32 {
            let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
            s += if k % 2 == 1 { term } else { -term };
            if term < 1e-300 {
                break;
            }
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// Largest censoring fraction tolerated by [`exit_statistics`].
pub const MAX_CENSORED_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitStatistics {
    pub paths: usize,
    pub censored: usize,
    pub exit_left_freq: f64,
    pub exit_right_freq: f64,
    pub mean_exit_time: MCEstimate,
    /// Keyed by the site coordinate as written by `{}` formatting.
    pub mean_time_at: BTreeMap<String, MCEstimate>,
}

/// Exit side, exit time and time spent at `sites` for each path.
///
/// The exit time is the first grid time at or beyond an endpoint. Time at a
/// site accrues `t_j − t_{j-1}` whenever `values[j]` equals the site, which is
/// exact for paths held constant on `(t_{j-1}, t_j]`.
pub fn exit_statistics(paths: &[SamplePath], interval: &Interval, sites: &[f64]) -> Result<ExitStatistics> {
    let (a, b) = (interval.a(), interval.b());
    let mut exits = Vec::with_capacity(paths.len());
    let mut times_at: Vec<Vec<f64>> = vec![Vec::with_capacity(paths.len()); sites.len()];
    let (mut left, mut right, mut censored) = (0usize, 0usize, 0usize);
    for path in paths {
        let (grid, values) = (path.grid(), path.values());
        let hit = values.iter().position(|&x| x <= a || x >= b);
        let Some(j) = hit else {
            censored += 1;
            continue;
        };
        if values[j] <= a {
            left += 1;
        } else {
            right += 1;
        }
        exits.push(grid[j] - grid[0]);
        for (site, acc) in sites.iter().zip(times_at.iter_mut()) {
            let t: f64 = (1..j).filter(|&k| values[k] == *site).map(|k| grid[k] - grid[k - 1]).sum();
            acc.push(t);
        }
    }
    let n = paths.len();
    if n == 0 || censored as f64 > MAX_CENSORED_FRACTION * n as f64 {
        return Err(Error::InsufficientSample(format!("{censored} of {n} paths never left the interval")));
    }
    let done = (n - censored) as f64;
    let mean_time_at = sites
        .iter()
        .zip(&times_at)
        .map(|(s, v)| Ok((format!("{s}"), mc_mean(v)?)))
        .collect::<Result<_>>()?;
    Ok(ExitStatistics {
        paths: n,
        censored,
        exit_left_freq: left as f64 / done,
        exit_right_freq: right as f64 / done,
        mean_exit_time: mc_mean(&exits)?,
        mean_time_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use crate::time_change::{Construction, PathMeta};
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normals(seed: u64, n: usize, shift: f64) -> Vec<f64> {
        let mut rng = substream(seed, 0);
        (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) + shift).collect()
    }

    #[test]
    fn mean_examples() {
        let e = mc_mean(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!((e.mean, e.variance, e.se), (1.0, 0.0, 0.0));
        let e = mc_mean(&[0.0, 1.0]).unwrap();
        assert_eq!((e.mean, e.variance, e.se), (0.5, 0.5, 0.5));
        assert_eq!(e.ci_half_width, 1.5);
        assert!(matches!(mc_mean(&[1.0]), Err(Error::InsufficientSample(_))));
        let e = mc_mean(&normals(1, 100_000, 0.0)).unwrap();
        assert!(e.mean.abs() < 3.0 / 100_000f64.sqrt());
    }

    #[test]
    fn fraction_matches_mean_of_indicators() {
        let xs: Vec<f64> = (0..37).map(|i| (i % 3 == 0) as u8 as f64).collect();
        let a = mc_mean(&xs).unwrap();
        let b = mc_fraction(13, 37).unwrap();
        assert!((a.mean - b.mean).abs() < 1e-15 && (a.variance - b.variance).abs() < 1e-15);
    }

    #[test]
    fn ks_examples() {
        let a = normals(2, 500, 0.0);
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
        let r = ks_two_sample(&normals(3, 1000, 0.0), &normals(4, 1000, 5.0)).unwrap();
        assert!(r.p_value < 1e-6);
        assert!(ks_two_sample(&a[..49], &a).is_err());
    }

    #[test]
    fn ks_null_calibration() {
        let rejections = (0..100u64)
            .filter(|&r| ks_two_sample(&normals(100 + 2 * r, 1000, 0.0), &normals(101 + 2 * r, 1000, 0.0)).unwrap().p_value < 0.05)
            .count();
        assert!((rejections as f64 / 100.0 - 0.05).abs() <= 0.07, "{rejections}");
    }

    #[test]
    fn kolmogorov_reference_values() {
        // Critical values of the limiting distribution.
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-4);
        assert!((kolmogorov_sf(1.0) - 0.26999967).abs() < 1e-6);
        // Both series agree where they meet.
        let lam: f64 = 1.18;
        let series: f64 = 2.0 * (1..50).map(|k| (-1f64).powi(k - 1) * (-2.0 * (k * k) as f64 * lam * lam).exp()).sum::<f64>();
        assert!((kolmogorov_sf(lam - 1e-12) - series).abs() < 1e-9);
    }

    #[test]
    fn exit_statistics_synthetic() {
        let i = Interval::new(-1.0, 1.0).unwrap();
        let meta = PathMeta::new(Construction::TimeChange);
        let p = SamplePath::new(vec![0.0, 0.5, 1.0, 1.5], vec![0.0, 0.0, 0.5, 1.0], meta.clone()).unwrap();
        let q = SamplePath::new(vec![0.0, 1.0, 3.0], vec![0.0, 0.0, -1.0], meta.clone()).unwrap();
        let s = exit_statistics(&[p.clone(), p.clone(), q], &i, &[0.0]).unwrap();
        assert!((s.exit_right_freq - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.exit_left_freq + s.exit_right_freq - 1.0).abs() < 1e-15);
        assert!((s.mean_exit_time.mean - 2.0).abs() < 1e-15);
        assert!((s.mean_time_at["0"].mean - (0.5 + 0.5 + 1.0) / 3.0).abs() < 1e-15);
        let stuck = SamplePath::new(vec![0.0, 1.0], vec![0.0, 0.5], meta).unwrap();
        assert!(exit_statistics(&[p, stuck], &i, &[]).is_err());
    }

    proptest! {
        #[test]
        fn mean_permutation_invariant(mut xs in prop::collection::vec(-1e6f64..1e6, 2..200), seed in any::<u64>()) {
            let a = mc_mean(&xs).unwrap();
            let mut rng = substream(seed, 0);
            for i in (1..xs.len()).rev() {
                xs.swap(i, rng.random_range(0..=i));
            }
            let b = mc_mean(&xs).unwrap();
            prop_assert!((a.mean - b.mean).abs() <= 1e-12 * a.mean.abs().max(1.0));
            prop_assert!((a.variance - b.variance).abs() <= 1e-12 * a.variance.abs().max(1.0));
        }

        #[test]
        fn ks_symmetric(a in prop::collection::vec(-10.0f64..10.0, 50..120), b in prop::collection::vec(-10.0f64..10.0, 50..120)) {
            let x = ks_two_sample(&a, &b).unwrap();
            let y = ks_two_sample(&b, &a).unwrap();
            prop_assert_eq!(x.statistic, y.statistic);
            prop_assert_eq!(x.p_value, y.p_value);
            prop_assert!((0.0..=1.0).contains(&x.statistic) && (0.0..=1.0).contains(&x.p_value));
        }
    }
}
