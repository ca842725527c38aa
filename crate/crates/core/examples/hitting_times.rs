//! First passage of GBM to x = 1/e by three crossing detectors.
//!
//! `log X` is Brownian motion with drift −1/2, so the passage time is
//! inverse Gaussian with mean 2.

use zeroset::stopping_times::hitting_time_samples;
use zeroset::{CrossingMethod, FieldSpec, StepPolicy};

fn main() -> zeroset::Result<()> {
    let field = FieldSpec::Linear1d {}.build()?;
    let threshold = (-2.0f64).exp(); // level x² at x = 1/e
    for h in [2f64.powi(-4), 2f64.powi(-8)] {
        for method in [CrossingMethod::Grid, CrossingMethod::Interpolated, CrossingMethod::BridgeCorrected] {
            let xs = hitting_time_samples(&field, &[1.0], threshold, 40.0, &StepPolicy::fixed(h), method, 4000, 5)?;
            let mean = xs.iter().map(|c| c.time_or_horizon()).sum::<f64>() / xs.len() as f64;
            let censored = xs.iter().filter(|c| c.is_censored()).count();
            println!("h = {h:<10} {method:<16?} mean T = {mean:.4}  censored = {censored}");
        }
    }
    Ok(())
}
