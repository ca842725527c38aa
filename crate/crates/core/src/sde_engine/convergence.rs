//! Strong-order check of the Euler–Maruyama engine against the closed-form
//! geometric Brownian motion `X_t = x·exp(B_t − t/2)` on shared noise.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{em_update, run_paths};
use crate::coefficients::FieldSpec;
use crate::error::{Error, Result};
use crate::verification::{fit_loglog_slope, EstimateWithCI};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrongErrorRow {
    pub h: f64,
    pub steps: usize,
    /// `E|X_T^h − X_T|`.
    pub error: EstimateWithCI,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrongOrderStudy {
    pub rows: Vec<StrongErrorRow>,
    /// Fitted slope of `ln error` against `ln h`.
    pub slope: f64,
}

/// Runs the linear field `σ(x) = x` at steps `h = horizon / 2^e` for every
/// `e` in `exponents`, all driven by the same finest-level increments.
pub fn strong_order_study(
    x0: f64,
    horizon: f64,
    exponents: &[u32],
    n_paths: usize,
    master_seed: u64,
) -> Result<StrongOrderStudy> {
    if exponents.len() < 2 {
        return Err(Error::invalid("strong-order study needs at least two step sizes"));
    }
    if !(horizon > 0.0 && horizon.is_finite()) || !x0.is_finite() || n_paths < 2 {
        return Err(Error::invalid("strong-order study needs finite x0, positive horizon, n_paths >= 2"));
    }
    let finest = *exponents.iter().max().unwrap();
    if finest > 20 {
        return Err(Error::invalid("finest exponent capped at 20"));
    }
    let field = FieldSpec::Linear1d {}.build()?;
    let n_fine = 1usize << finest;
    let sd = (horizon / n_fine as f64).sqrt();

    let per_path = run_paths(n_paths, master_seed, |seed| {
        let mut rng = seed.noise_rng();
        let fine: Vec<f64> = (0..n_fine)
            .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let exact = x0 * (-0.5 * horizon + fine.iter().sum::<f64>()).exp();
        let mut ev = field.evaluator();
        let mut out = [0.0];
        let errors = exponents
            .iter()
            .map(|&e| {
                let block = 1usize << (finest - e);
                let h = horizon / (1u64 << e) as f64;
                let mut x = [x0];
                for chunk in fine.chunks(block) {
                    let dw = [chunk.iter().sum::<f64>()];
                    ev.eval(&x);
                    em_update(&ev, &x, h, &dw, &mut out);
                    x = out;
                }
                (x[0] - exact).abs()
            })
            .collect::<Vec<f64>>();
        Ok(errors)
    })?;

    let mut rows = Vec::with_capacity(exponents.len());
    for (j, &e) in exponents.iter().enumerate() {
        let samples: Vec<f64> = per_path.iter().map(|v| v[j]).collect();
        rows.push(StrongErrorRow {
            h: horizon / (1u64 << e) as f64,
            steps: 1 << e,
            error: EstimateWithCI::from_samples(&samples, 0)?,
        });
    }
    let slope = fit_loglog_slope(&rows.iter().map(|r| (r.h, r.error.point)).collect::<Vec<_>>())
        .ok_or_else(|| Error::invalid("strong errors are zero; slope undefined"))?;
    Ok(StrongOrderStudy { rows, slope })
}
