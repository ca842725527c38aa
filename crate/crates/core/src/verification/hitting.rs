use std::ops::ControlFlow;

use super::{estimate_with_ci, CiMethod, EstimateWithCI};
use crate::coefficients::CoefficientField;
use crate::error::{Error, Result};
use crate::sde_engine::{run_paths, simulate_with, StepPolicy};

/// For each `ε` in `eps_grid`, estimates `P[min_{t ≤ horizon} level(X_t) ≤ ε]`
/// from the grid values of the level along each path.
///
/// `eps_grid` must be strictly decreasing. A path stops as soon as it
/// reaches the smallest `ε`. `censored_n` counts the paths that did not reach
/// that `ε` before the horizon.
pub fn estimate_lambda_hitting(
    field: &CoefficientField,
    start: &[f64],
    horizon: f64,
    eps_grid: &[f64],
    n_paths: usize,
    policy: &StepPolicy,
    master_seed: u64,
) -> Result<Vec<EstimateWithCI>> {
    if eps_grid.is_empty() || eps_grid.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::invalid("eps_grid must be nonempty with positive entries"));
    }
    if eps_grid.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::invalid("eps_grid must be strictly decreasing"));
    }
    if n_paths == 0 {
        return Err(Error::invalid("n_paths must be positive"));
    }
    if field.in_lambda(start)? {
        return Err(Error::invalid("start point lies in Lambda"));
    }
    let smallest = *eps_grid.last().unwrap();
    let minima = run_paths(n_paths, master_seed, |seed| {
        let mut rng = seed.noise_rng();
        let mut min_level = f64::INFINITY;
        let (_, l0) = simulate_with(field, start, horizon, policy, &mut rng, |seg| {
            min_level = min_level.min(seg.level1);
            if min_level <= smallest {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })?;
        Ok(min_level.min(l0))
    })?;
    eps_grid
        .iter()
        .map(|&eps| {
            let hits = minima.iter().filter(|&&m| m <= eps).count();
            Ok(estimate_with_ci(hits, n_paths, CiMethod::Wilson)?.with_censored(n_paths - hits))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::FieldSpec;

    #[test]
    fn unreachable_plateau_is_never_hit() {
        // Λ = (−∞, 0]; drift pushes away and the start is far from it
        let f = CoefficientField::scalar("plateau", |x| x.clamp(0.0, 1.0), |x| x.clamp(0.0, 1.0))
            .unwrap()
            .with_declared_lipschitz(1.0)
            .unwrap();
        let est = estimate_lambda_hitting(&f, &[5.0], 1.0, &[1e-2, 1e-6], 200, &StepPolicy::fixed(1e-2), 1).unwrap();
        for e in est {
            assert_eq!(e.point, 0.0);
            assert_eq!(e.censored_n, 200);
        }
    }

    #[test]
    fn estimates_are_nonincreasing_as_eps_shrinks() {
        let gbm = FieldSpec::Linear1d {}.build().unwrap();
        let est =
            estimate_lambda_hitting(&gbm, &[1.0], 2.0, &[0.5, 0.1, 1e-2], 300, &StepPolicy::fixed(1e-2), 8).unwrap();
        assert!(est.windows(2).all(|w| w[1].point <= w[0].point));
    }

    #[test]
    fn rejects_bad_grids_and_lambda_start() {
        let gbm = FieldSpec::Linear1d {}.build().unwrap();
        let p = StepPolicy::default();
        assert!(estimate_lambda_hitting(&gbm, &[1.0], 1.0, &[1e-3, 1e-2], 10, &p, 0).is_err());
        assert!(estimate_lambda_hitting(&gbm, &[1.0], 1.0, &[], 10, &p, 0).is_err());
        assert!(estimate_lambda_hitting(&gbm, &[0.0], 1.0, &[1e-2], 10, &p, 0).is_err());
    }
}
