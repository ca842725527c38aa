//! Displacement and level-change estimates before the band is left.
//!
//! The power-law field with α = 1/2 is not Lipschitz at 0, and the
//! level-change check fails there.

use zeroset::verification::check_local_bounds;
use zeroset::{FieldSpec, StepPolicy};

fn show(label: &str, spec: FieldSpec, x: &[f64], a: f64, policy: StepPolicy) -> zeroset::Result<()> {
    let field = spec.build()?;
    println!("{label}");
    for pair in check_local_bounds(&field, x, a, 1, &[0.01, 0.1, 1.0], 4000, &policy, 8)? {
        for r in [pair.displacement, pair.level_change] {
            println!(
                "  {:<13} t={:<5} lhs={:.4e} (ci_low {:.4e})  rhs={:.4e}  satisfied={}",
                r.bound_name,
                r.parameter("t").unwrap(),
                r.lhs.point,
                r.lhs.ci_low,
                r.rhs,
                r.satisfied()
            );
        }
    }
    Ok(())
}

fn main() -> zeroset::Result<()> {
    show("linear-1d, x = 2^-1/2", FieldSpec::Linear1d {}, &[0.5f64.sqrt()], 1.0, StepPolicy::fixed(1e-4))?;
    show("diagonal-linear d=2", FieldSpec::DiagonalLinear { d: 2 }, &[0.5 / 2f64.sqrt(); 2], 1.0, StepPolicy::fixed(1e-4))?;
    let adaptive = StepPolicy::LevelAdaptive {
        h_max: 1e-4,
        h_min: 1e-12,
        level_fraction: 1e-2,
    };
    show("power-law α=1/2, x = 1e-4", FieldSpec::PowerLaw { alpha: 0.5, k_region: None }, &[1e-4], 2e-4, adaptive)
}
