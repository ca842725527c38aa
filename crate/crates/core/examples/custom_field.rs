//! A user-defined 2-D field with a sampled Lipschitz constant.
//!
//! σ(x) = [[x₂, 0], [0, x₁]] and b(x) = −(x₁, x₂)/2, so the level is
//! `1.25‖x‖²` and vanishes only at the origin.

use zeroset::coefficients::BoxRegion;
use zeroset::{simulate_path, CoefficientField, StepPolicy};

fn main() -> zeroset::Result<()> {
    let field = CoefficientField::new(
        "swapped-diagonal",
        2,
        2,
        |x, s| {
            s.copy_from_slice(&[x[1], 0.0, 0.0, x[0]]);
        },
        |x, b| {
            b[0] = -0.5 * x[0];
            b[1] = -0.5 * x[1];
        },
    )?
    .with_estimated_lipschitz(&BoxRegion::new(vec![-2.0, -2.0], vec![2.0, 2.0])?, 2000, 11)?;

    // the true constant is 1 for σ and 1/2 for b; the estimate carries a 1.25 safety factor
    println!("estimated K = {:.4}", field.lipschitz_k()?);

    let path = simulate_path(&field, &[1.0, -0.5], 2.0, &StepPolicy::fixed(1e-3), 3)?;
    let lowest = path.levels.iter().copied().fold(f64::INFINITY, f64::min);
    println!("steps = {}, start level = {:.4}, lowest level = {:.3e}", path.len() - 1, path.levels[0], lowest);
    Ok(())
}
