//! Numerical laboratory for the inaccessibility of the zero set
//! `Λ = {x : σ(x) = 0, b(x) = 0}` of an SDE `dX = σ(X) dB + b(X) dt` with
//! Lipschitz coefficients.
//!
//! The crate simulates Euler–Maruyama paths, tracks first passages of the
//! level function `‖σ(x)‖²_F + ‖b(x)‖²` through dyadic levels `A/2^k`, and
//! checks each quantitative step of the stopping-time argument by Monte
//! Carlo:
//!
//! * [`verification::check_local_bounds`]: second moment of the stopped
//!   displacement, and the Lipschitz bound on the change of level;
//! * [`verification::check_sqrt_escape_bound`]: `P_x[S_k ≤ t] ≤ C√t` with
//!   `C = 4√6·K·√(m+1)` ([`verification::markov_constant`]);
//! * [`verification::check_halving_persistence`]: a halving of the level
//!   takes at least `t₀` with probability ≥ 1/2;
//! * [`verification::estimate_lambda_hitting`]: empirical probability of
//!   approaching Λ, next to the 1-D integral test
//!   [`verification::accessibility_integral_1d`].
//!
//! Declarative scenarios (JSON) are run by [`scenario::run`]; the `zeroset`
//! binary wraps that. Runnable programs for each capability live in
//! `examples/`.

// `!(a < b)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coefficients;
pub mod error;
pub mod scenario;
pub mod sde_engine;
pub mod stopping_times;
pub mod verification;

pub use coefficients::{frobenius_norm, CoefficientField, FieldSpec, Matrix};
pub use error::{Error, Result};
pub use sde_engine::{simulate_path, PathRealization, PathSeed, StepPolicy};
pub use stopping_times::{CrossingMethod, LevelCrossing};
pub use verification::{BoundCheckReport, EstimateWithCI};
