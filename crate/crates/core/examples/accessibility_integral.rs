//! The one-dimensional test: 0 is accessible iff ∫₀ᵃ y σ(y)⁻² dy < ∞.

use zeroset::verification::{accessibility_integral_1d, Accessibility};

fn main() -> zeroset::Result<()> {
    for alpha in [0.25, 0.5, 0.75, 0.95, 1.0, 1.5] {
        match accessibility_integral_1d(|y: f64| y.abs().powf(alpha), 1.0)? {
            Accessibility::Finite { value, error, .. } => {
                println!("alpha = {alpha:<5} finite {value:.10} ± {error:.1e} (exact {:.10})", 1.0 / (2.0 - 2.0 * alpha))
            }
            Accessibility::Divergent { partial_sum, windows } => {
                println!("alpha = {alpha:<5} divergent (partial sum {partial_sum:.3} after {windows} windows)")
            }
        }
    }
    Ok(())
}
