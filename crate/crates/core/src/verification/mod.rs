//! Monte Carlo checks of every quantitative step in the inaccessibility
//! argument, plus the one-dimensional integral test for accessibility of 0.

mod bounds;
mod estimate;
mod hitting;
mod integral;

pub use bounds::{
    check_displacement_bound, check_halving_persistence, check_level_change_bound, check_local_bounds,
    check_sqrt_escape_bound, fitted_escape_exponent, BoundCheckReport, LocalBoundPair, Relation,
};
pub use estimate::{estimate_with_ci, fit_loglog_slope, CiMethod, EstimateWithCI, CONFIDENCE};
pub use hitting::estimate_lambda_hitting;
pub use integral::{accessibility_integral_1d, accessibility_integral_1d_with, Accessibility, IntegralOptions};

/// `C = 4√6 · K · √(m + 1)`, the constant in `P_x[S_k ≤ t] ≤ C√t`.
///
/// It is the product `(2^{k+1}/A) · 2(3A/2^k)^{1/2} · K · √((m+1)(A/2^{k−1}) t)`
/// divided by `√t`, in which `A` and `k` cancel.
pub fn markov_constant(m: usize, k_lipschitz: f64) -> f64 {
    4.0 * 6f64.sqrt() * k_lipschitz * ((m + 1) as f64).sqrt()
}

/// `min(1/(4C²), 1/2)`, nudged down if rounding would put `C·√t₀` above 1/2.
pub fn t0_threshold(c: f64) -> f64 {
    if !(c > 0.0) {
        return 0.5;
    }
    let mut t0 = (1.0 / (4.0 * c * c)).min(0.5);
    while c * t0.sqrt() > 0.5 {
        t0 = t0.next_down();
    }
    t0
}

/// Geometric grid `t₀·2^j`, `j ≥ −below`, strictly inside `(0, min(1, 1/C²))`.
pub fn default_t_grid(c: f64, below: u32) -> Vec<f64> {
    let t0 = t0_threshold(c);
    let cap = if c > 0.0 { (1.0 / (c * c)).min(1.0) } else { 1.0 };
    let mut grid = Vec::new();
    let mut t = t0 / 2f64.powi(below as i32);
    while t < cap {
        grid.push(t);
        t *= 2.0;
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn markov_constant_examples() {
        assert!((markov_constant(1, 1.0) - 8.0 * 3f64.sqrt()).abs() < 1e-12);
        assert!((markov_constant(1, 1.0) - 13.8564).abs() < 1e-4);
        assert_eq!(markov_constant(3, 0.0), 0.0);
        assert!((markov_constant(2, 3.0) - 2.0 * markov_constant(2, 1.5)).abs() < 1e-12);
    }

    #[test]
    fn t0_examples() {
        let c = 8.0 * 3f64.sqrt();
        assert!((t0_threshold(c) - 1.0 / 768.0).abs() < 1e-15);
        assert_eq!(t0_threshold(0.0), 0.5);
        assert_eq!(t0_threshold(1.0), 0.25);
    }

    #[test]
    fn default_grid_is_informative() {
        let c = markov_constant(1, 1.0);
        let grid = default_t_grid(c, 4);
        assert_eq!(grid.len(), 6);
        assert!(grid.iter().all(|&t| c * t.sqrt() < 1.0 && t > 0.0));
        assert!((grid[4] - 1.0 / 768.0).abs() < 1e-15);
        let flat = default_t_grid(0.0, 1);
        assert_eq!(flat, vec![0.25, 0.5]);
    }
}
