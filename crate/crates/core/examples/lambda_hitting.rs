//! How often paths get within ε of the zero set by time 10.
//!
//! For σ(y) = |y|^α the set {0} is reached when α < 1 and not otherwise.

use zeroset::verification::estimate_lambda_hitting;
use zeroset::{FieldSpec, StepPolicy};

fn main() -> zeroset::Result<()> {
    let eps = [1e-2, 1e-4, 1e-6];
    for alpha in [0.5, 1.0, 1.5] {
        let field = FieldSpec::PowerLaw { alpha, k_region: None }.build()?;
        let policy = if alpha < 1.0 {
            StepPolicy::LevelAdaptive { h_max: 1e-3, h_min: 1e-12, level_fraction: 1e-3 }
        } else {
            StepPolicy::LevelAdaptive { h_max: 1e-3, h_min: 1e-3, level_fraction: 1e9 }
        };
        let est = estimate_lambda_hitting(&field, &[1.0], 10.0, &eps, 2000, &policy, 4)?;
        let cells: Vec<String> = est.iter().map(|e| format!("{:.4}", e.point)).collect();
        println!("alpha = {alpha}: {}", cells.join("  "));
    }
    // BESQ(0) after scaling: P[hit 0 by t] = exp(−2x/t)
    println!("alpha = 0.5 exact: {:.4}", (-0.2f64).exp());
    Ok(())
}
