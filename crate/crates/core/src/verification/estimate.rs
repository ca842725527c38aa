use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{Error, Result};

/// Two-sided confidence level used by every interval in the crate.
pub const CONFIDENCE: f64 = 0.95;

/// Standard normal quantile for [`CONFIDENCE`].
const Z: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CiMethod {
    #[default]
    Wilson,
    ClopperPearson,
    Normal,
}

/// A Monte Carlo point estimate with a two-sided interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateWithCI {
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
    pub method: CiMethod,
    /// Samples whose underlying stopping time was truncated at the horizon.
    pub censored_n: usize,
}

impl EstimateWithCI {
    /// Sample mean with a normal-approximation interval.
    pub fn from_samples(samples: &[f64], censored_n: usize) -> Result<Self> {
        let n = samples.len();
        if n == 0 {
            return Err(Error::invalid("cannot estimate a mean from zero samples"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite Monte Carlo sample"));
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let half = Z * (var / n as f64).sqrt();
        Ok(EstimateWithCI {
            point: mean,
            ci_low: mean - half,
            ci_high: mean + half,
            n,
            method: CiMethod::Normal,
            censored_n,
        })
    }

    pub fn with_censored(mut self, censored_n: usize) -> Self {
        self.censored_n = censored_n;
        self
    }

    pub fn contains(&self, v: f64) -> bool {
        self.ci_low <= v && v <= self.ci_high
    }
}

/// Binomial proportion estimate for `successes` out of `n`.
///
/// The normal approximation is honoured only when `n·p̂·(1 − p̂) ≥ 10`;
/// otherwise the Wilson interval is returned and `method` says so.
pub fn estimate_with_ci(successes: usize, n: usize, method: CiMethod) -> Result<EstimateWithCI> {
    if n == 0 || successes > n {
        return Err(Error::invalid(format!("invalid binomial counts {successes}/{n}")));
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let (lo, hi, method) = match method {
        CiMethod::Normal if nf * p * (1.0 - p) >= 10.0 => {
            let half = Z * (p * (1.0 - p) / nf).sqrt();
            (p - half, p + half, CiMethod::Normal)
        }
        CiMethod::ClopperPearson => {
            let alpha = 1.0 - CONFIDENCE;
            let lo = if successes == 0 {
                0.0
            } else {
                beta_quantile(successes as f64, (n - successes + 1) as f64, alpha / 2.0)?
            };
            let hi = if successes == n {
                1.0
            } else {
                beta_quantile((successes + 1) as f64, (n - successes) as f64, 1.0 - alpha / 2.0)?
            };
            (lo, hi, CiMethod::ClopperPearson)
        }
        _ => {
            let z2 = Z * Z;
            let denom = 1.0 + z2 / nf;
            let center = (p + z2 / (2.0 * nf)) / denom;
            let half = Z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
            let lo = if successes == 0 { 0.0 } else { center - half };
            let hi = if successes == n { 1.0 } else { center + half };
            (lo, hi, CiMethod::Wilson)
        }
    };
    Ok(EstimateWithCI {
        point: p,
        ci_low: lo.clamp(0.0, p),
        ci_high: hi.clamp(p, 1.0),
        n,
        method,
        censored_n: 0,
    })
}

fn beta_quantile(a: f64, b: f64, q: f64) -> Result<f64> {
    let dist = Beta::new(a, b).map_err(|e| Error::invalid(format!("beta({a}, {b}): {e}")))?;
    Ok(dist.inverse_cdf(q))
}

/// Least-squares slope of `ln y` against `ln x`, using only points with
/// positive finite coordinates. `None` when fewer than two distinct `x` remain.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 2 {
        return None;
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn wilson_boundary_and_symmetry() {
        let e = estimate_with_ci(0, 100, CiMethod::Wilson).unwrap();
        assert_eq!((e.point, e.ci_low), (0.0, 0.0));
        assert!(e.ci_high > 0.0 && e.ci_high < 0.05);

        let e = estimate_with_ci(50, 100, CiMethod::Wilson).unwrap();
        assert_eq!(e.point, 0.5);
        assert!(((0.5 - e.ci_low) - (e.ci_high - 0.5)).abs() < 1e-12);
        // textbook value for 50/100
        assert!((e.ci_low - 0.4038).abs() < 1e-4, "{}", e.ci_low);
    }

    /// P[Bin(n, p) ≥ k] by direct summation.
    fn upper_tail(n: usize, k: usize, p: f64) -> f64 {
        let mut total = 0.0;
        for j in k..=n {
            let mut c = 1.0f64;
            for i in 0..j {
                c *= (n - i) as f64 / (i + 1) as f64;
            }
            total += c * p.powi(j as i32) * (1.0 - p).powi((n - j) as i32);
        }
        total
    }

    fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(lo) * f(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn clopper_pearson_matches_binomial_tail_inversion() {
        let (x, n) = (5, 10);
        let e = estimate_with_ci(x, n, CiMethod::ClopperPearson).unwrap();
        // lower: P[Bin ≥ x | p] = α/2, upper: P[Bin ≤ x | p] = α/2
        let lo = bisect(|p| upper_tail(n, x, p) - 0.025, 1e-9, 1.0 - 1e-9);
        let hi = bisect(|p| (1.0 - upper_tail(n, x + 1, p)) - 0.025, 1e-9, 1.0 - 1e-9);
        assert!((e.ci_low - lo).abs() < 1e-8, "{} vs {lo}", e.ci_low);
        assert!((e.ci_high - hi).abs() < 1e-8, "{} vs {hi}", e.ci_high);
        assert!(e.contains(0.5));
    }

    #[test]
    fn normal_falls_back_to_wilson_when_skewed() {
        assert_eq!(estimate_with_ci(1, 20, CiMethod::Normal).unwrap().method, CiMethod::Wilson);
        assert_eq!(estimate_with_ci(100, 200, CiMethod::Normal).unwrap().method, CiMethod::Normal);
    }

    #[test]
    fn invalid_counts() {
        assert!(estimate_with_ci(3, 2, CiMethod::Wilson).is_err());
        assert!(estimate_with_ci(0, 0, CiMethod::Wilson).is_err());
    }

    #[test]
    fn wilson_coverage_close_to_nominal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let covered = (0..1000)
            .filter(|_| {
                let s = (0..200).filter(|_| rng.random::<f64>() < 0.3).count();
                estimate_with_ci(s, 200, CiMethod::Wilson).unwrap().contains(0.3)
            })
            .count();
        assert!((930..=970).contains(&covered), "{covered}");
    }

    #[test]
    fn mean_estimate() {
        let e = EstimateWithCI::from_samples(&[1.0, 2.0, 3.0, 4.0], 1).unwrap();
        assert_eq!(e.point, 2.5);
        assert!(e.ci_low < 2.5 && e.ci_high > 2.5);
        assert_eq!(e.censored_n, 1);
        let z = EstimateWithCI::from_samples(&[0.0; 10], 0).unwrap();
        assert_eq!((z.ci_low, z.point, z.ci_high), (0.0, 0.0, 0.0));
    }

    #[test]
    fn loglog_slope() {
        let pts: Vec<(f64, f64)> = [0.1, 0.2, 0.4].iter().map(|&t: &f64| (t, 3.0 * t.sqrt())).collect();
        assert!((fit_loglog_slope(&pts).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(fit_loglog_slope(&[(0.1, 0.0), (0.2, 0.3)]), None);
    }

    proptest! {
        #[test]
        fn interval_brackets_point(n in 1usize..500, frac in 0.0f64..=1.0, which in 0u8..3) {
            let s = ((n as f64) * frac).round() as usize;
            let method = [CiMethod::Wilson, CiMethod::ClopperPearson, CiMethod::Normal][which as usize];
            let e = estimate_with_ci(s.min(n), n, method).unwrap();
            prop_assert!(0.0 <= e.ci_low && e.ci_low <= e.point && e.point <= e.ci_high && e.ci_high <= 1.0);
        }
    }
}
