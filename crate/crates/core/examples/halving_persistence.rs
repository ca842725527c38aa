//! Probability that the level does not halve within t₀ = 1/(4C²).

use zeroset::verification::{check_halving_persistence, markov_constant, t0_threshold};
use zeroset::{FieldSpec, StepPolicy};

fn main() -> zeroset::Result<()> {
    let field = FieldSpec::Linear1d {}.build()?;
    let t0 = t0_threshold(markov_constant(1, 1.0));
    println!("t0 = {t0} (1/768 = {})", 1.0 / 768.0);
    let starts: Vec<Vec<f64>> = [0.71, 0.8, 1.0].iter().map(|&x| vec![x]).collect();
    let r = check_halving_persistence(&field, &starts, 1.0, 1, t0, 10_000, &StepPolicy::fixed(1e-6), 2)?;
    println!(
        "P[T_(A/4) >= t0] = {:.4}  [{:.4}, {:.4}]  needs >= {}: {}",
        r.lhs.point,
        r.lhs.ci_low,
        r.lhs.ci_high,
        r.rhs,
        r.satisfied()
    );
    Ok(())
}
