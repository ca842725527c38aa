//! `P[S_k ≤ t] ≤ C√t` for the linear field, C = 8√3.

use zeroset::verification::{check_sqrt_escape_bound, default_t_grid, markov_constant};
use zeroset::{FieldSpec, StepPolicy};

fn main() -> zeroset::Result<()> {
    let field = FieldSpec::Linear1d {}.build()?;
    let c = markov_constant(field.m(), field.lipschitz_k()?);
    let mut grid = default_t_grid(c, 4);
    grid.push(0.05); // vacuous, shown for contrast
    for k in 1..=3u32 {
        let x = [2f64.powf(-(k as f64) / 2.0)];
        let reports = check_sqrt_escape_bound(&field, &x, 1.0, k, &grid, 20_000, &StepPolicy::fixed(1e-5), k as u64)?;
        for r in reports {
            println!(
                "k={k} t={:<10.3e} P={:<8.5} ci_high={:<8.5} C*sqrt(t)={:<8.4} {}{}",
                r.parameter("t").unwrap(),
                r.lhs.point,
                r.lhs.ci_high,
                r.rhs,
                if r.satisfied() { "ok" } else { "VIOLATED" },
                if r.vacuous { " (vacuous)" } else { "" },
            );
        }
    }
    Ok(())
}
