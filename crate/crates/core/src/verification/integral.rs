//! The integral test `∫_0^a y σ(y)^{−2} dy < ∞` for accessibility of 0 by a
//! driftless 1-D diffusion, evaluated window by window on `[a/2^{j+1}, a/2^j]`.

use std::cell::Cell;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Accessibility {
    /// The integral converges: 0 is accessible.
    Finite { value: f64, error: f64, windows: usize },
    /// Window contributions stopped decaying geometrically: 0 is inaccessible.
    Divergent { partial_sum: f64, windows: usize },
}

impl Accessibility {
    pub fn is_finite(&self) -> bool {
        matches!(self, Accessibility::Finite { .. })
    }

    pub fn verdict(&self) -> &'static str {
        match self {
            Accessibility::Finite { .. } => "finite",
            Accessibility::Divergent { .. } => "divergent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralOptions {
    /// Number of trailing windows examined for geometric decay.
    pub window_memory: usize,
    /// Geometric-mean window ratio at or above `1 − flat_margin` counts as no decay.
    pub flat_margin: f64,
    /// Stop once the extrapolated tail is below `rel_tol · sum`.
    pub rel_tol: f64,
    pub max_windows: usize,
}

impl Default for IntegralOptions {
    fn default() -> Self {
        IntegralOptions {
            window_memory: 12,
            flat_margin: 1e-3,
            rel_tol: 1e-12,
            max_windows: 1000,
        }
    }
}

pub fn accessibility_integral_1d<S: Fn(f64) -> f64>(sigma: S, a: f64) -> Result<Accessibility> {
    accessibility_integral_1d_with(sigma, a, IntegralOptions::default())
}

pub fn accessibility_integral_1d_with<S: Fn(f64) -> f64>(
    sigma: S,
    a: f64,
    opts: IntegralOptions,
) -> Result<Accessibility> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::invalid(format!("upper limit must be positive, got {a}")));
    }
    if opts.window_memory < 2 || opts.max_windows <= opts.window_memory {
        return Err(Error::invalid("need window_memory >= 2 and max_windows > window_memory"));
    }
    // σ is continuous, so a sign change between nodes means a zero in (0, a]
    let sign = Cell::new(None::<bool>);
    let integrand = |y: f64| -> Result<f64> {
        let s = sigma(y);
        let v = y / (s * s);
        if s == 0.0 || !v.is_finite() {
            return Err(Error::invalid(format!("sigma vanishes or is not finite at y = {y}")));
        }
        match sign.get() {
            None => sign.set(Some(s > 0.0)),
            Some(pos) if pos != (s > 0.0) => {
                return Err(Error::invalid(format!("sigma changes sign near y = {y}, so it vanishes in (0, a]")))
            }
            _ => {}
        }
        Ok(v)
    };

    let mut windows: Vec<f64> = Vec::new();
    let mut sum = 0.0;
    let mut quad_err = 0.0;
    let mut hi = a;
    let mut ratio = 1.0;
    for _ in 0..opts.max_windows {
        let lo = hi / 2.0;
        if lo < f64::MIN_POSITIVE * 1e10 {
            break;
        }
        let (w, e) = adaptive_gk15(&integrand, lo, hi, 1e-14)?;
        windows.push(w);
        sum += w;
        quad_err += e;
        hi = lo;

        let n = windows.len();
        if n <= opts.window_memory {
            continue;
        }
        let recent = &windows[n - opts.window_memory - 1..];
        let log_ratio: f64 = recent.windows(2).map(|p| (p[1] / p[0]).ln()).sum::<f64>() / opts.window_memory as f64;
        ratio = log_ratio.exp();
        if ratio >= 1.0 - opts.flat_margin {
            return Ok(Accessibility::Divergent {
                partial_sum: sum,
                windows: n,
            });
        }
        let tail = w * ratio / (1.0 - ratio);
        if tail <= opts.rel_tol * sum {
            return Ok(finite(sum, tail, quad_err, n));
        }
    }
    let n = windows.len();
    if ratio < 1.0 - opts.flat_margin {
        let tail = windows[n - 1] * ratio / (1.0 - ratio);
        // out of windows: the extrapolated tail is the dominant uncertainty
        Ok(Accessibility::Finite {
            value: sum + tail,
            error: tail + quad_err + n as f64 * f64::EPSILON * sum,
            windows: n,
        })
    } else {
        Ok(Accessibility::Divergent {
            partial_sum: sum,
            windows: n,
        })
    }
}

fn finite(sum: f64, tail: f64, quad_err: f64, n: usize) -> Accessibility {
    Accessibility::Finite {
        value: sum + tail,
        error: tail + quad_err + n as f64 * f64::EPSILON * (sum + tail),
        windows: n,
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> Result<f64>>(f: &F, lo: f64, hi: f64) -> Result<(f64, f64)> {
    let c = 0.5 * (lo + hi);
    let r = 0.5 * (hi - lo);
    let fc = f(c)?;
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = r * XGK[i];
        let pair = f(c - dx)? + f(c + dx)?;
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    Ok((kronrod * r, ((kronrod - gauss) * r).abs()))
}

/// Maximum number of GK15 panels per window before the integrand is declared
/// non-integrable there.
const PANEL_BUDGET: usize = 20_000;

fn adaptive_gk15<F: Fn(f64) -> Result<f64>>(f: &F, lo: f64, hi: f64, rel_tol: f64) -> Result<(f64, f64)> {
    fn recurse<F: Fn(f64) -> Result<f64>>(
        f: &F,
        lo: f64,
        hi: f64,
        rel_tol: f64,
        depth: u32,
        budget: &mut usize,
    ) -> Result<(f64, f64)> {
        if *budget == 0 {
            return Err(Error::invalid(format!(
                "quadrature did not converge near [{lo}, {hi}]; sigma may vanish there"
            )));
        }
        *budget -= 1;
        let (v, e) = gk15(f, lo, hi)?;
        if e <= rel_tol * v.abs() {
            return Ok((v, e));
        }
        if depth == 0 {
            if e <= 1e-8 * v.abs() {
                return Ok((v, e));
            }
            return Err(Error::invalid(format!(
                "quadrature did not converge near y = {lo}; sigma may vanish there"
            )));
        }
        let mid = 0.5 * (lo + hi);
        let (a, ea) = recurse(f, lo, mid, rel_tol, depth - 1, budget)?;
        let (b, eb) = recurse(f, mid, hi, rel_tol, depth - 1, budget)?;
        Ok((a + b, ea + eb))
    }
    let mut budget = PANEL_BUDGET;
    recurse(f, lo, hi, rel_tol, 40, &mut budget)
}
