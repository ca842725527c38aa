//! First-passage laws for geometric Brownian motion checked against closed forms.

use statrs::distribution::{ContinuousCDF, Normal};
use zeroset::stopping_times::hitting_time_samples;
use zeroset::{CrossingMethod, FieldSpec, LevelCrossing, StepPolicy};

// log X_t = B_t − t/2 reaches −1 at an inverse Gaussian time: mean 2, shape 1.
const MEAN: f64 = 2.0;
const SHAPE: f64 = 1.0;
const HORIZON: f64 = 40.0;

fn inverse_gaussian_cdf(t: f64) -> f64 {
    let n = Normal::standard();
    let r = (SHAPE / t).sqrt();
    n.cdf(r * (t / MEAN - 1.0)) + (2.0 * SHAPE / MEAN).exp() * n.cdf(-r * (t / MEAN + 1.0))
}

fn samples(h: f64, method: CrossingMethod, n: usize) -> Vec<LevelCrossing> {
    let field = FieldSpec::Linear1d {}.build().unwrap();
    let target = (-2.0f64).exp();
    hitting_time_samples(&field, &[1.0], target, HORIZON, &StepPolicy::fixed(h), method, n, 77).unwrap()
}

/// Kolmogorov–Smirnov distance on `[0, HORIZON]`, censored paths counted as never hitting.
fn ks_distance(crossings: &[LevelCrossing]) -> f64 {
    let mut times: Vec<f64> = crossings.iter().filter_map(LevelCrossing::time).collect();
    times.sort_by(f64::total_cmp);
    let n = crossings.len() as f64;
    let mut worst = 0.0f64;
    for (i, &t) in times.iter().enumerate() {
        let f = inverse_gaussian_cdf(t);
        worst = worst.max((f - i as f64 / n).abs()).max((f - (i + 1) as f64 / n).abs());
    }
    worst.max((inverse_gaussian_cdf(HORIZON) - times.len() as f64 / n).abs())
}

fn censored_mean(crossings: &[LevelCrossing]) -> f64 {
    crossings.iter().map(LevelCrossing::time_or_horizon).sum::<f64>() / crossings.len() as f64
}

#[test]
fn oracle_cdf_is_a_distribution() {
    assert!(inverse_gaussian_cdf(1e-6) < 1e-12);
    assert!((inverse_gaussian_cdf(1e4) - 1.0).abs() < 1e-9);
    assert!(inverse_gaussian_cdf(1.0) < inverse_gaussian_cdf(2.0));
}

#[test]
fn interpolated_crossings_converge_under_refinement() {
    let n = 4000;
    let ks: Vec<f64> = [2f64.powi(-4), 2f64.powi(-6), 2f64.powi(-8)]
        .iter()
        .map(|&h| ks_distance(&samples(h, CrossingMethod::Interpolated, n)))
        .collect();
    // the 1/√n sampling floor is about 0.02 here
    assert!(ks[2] < 0.04, "{ks:?}");
    assert!(ks[0] > ks[2], "{ks:?}");
}

#[test]
fn grid_detection_is_late_and_bridge_correction_recovers() {
    // at coarser steps the Euler error itself dominates every detection method
    let h = 2f64.powi(-6);
    let n = 4000;
    let grid = ks_distance(&samples(h, CrossingMethod::Grid, n));
    let bridge = ks_distance(&samples(h, CrossingMethod::BridgeCorrected, n));
    assert!(bridge < grid, "bridge {bridge} vs grid {grid}");
    assert!(bridge < 0.03, "{bridge}");
}

#[test]
fn mean_hitting_time_close_to_two() {
    // censoring at 40 removes about 2e-3 of the mean
    let truncated: f64 = {
        let m = 200_000;
        let dt = HORIZON / m as f64;
        (0..m).map(|i| 1.0 - inverse_gaussian_cdf((i as f64 + 0.5) * dt)).sum::<f64>() * dt
    };
    assert!((truncated - MEAN).abs() < 0.01, "{truncated}");
    for method in [CrossingMethod::Interpolated, CrossingMethod::BridgeCorrected] {
        let mean = censored_mean(&samples(2f64.powi(-8), method, 4000));
        // standard error of the mean is about 0.03
        assert!((mean - truncated).abs() < 0.12, "{method:?}: {mean} vs {truncated}");
    }
}

