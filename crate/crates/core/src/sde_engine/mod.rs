//! Euler–Maruyama simulation of `X_t = x + ∫σ(X) dB + ∫b(X) ds`.
//!
//! Every path draws its Gaussian increments from its own ChaCha stream,
//! selected by `(master_seed, path_index)`, so a batch gives identical paths
//! whether it runs on one thread or many.

mod convergence;
mod monte_carlo;

use std::io::Write;
use std::ops::ControlFlow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientField, Evaluator};
use crate::error::{Error, Result};

pub use convergence::{strong_order_study, StrongErrorRow, StrongOrderStudy};
pub use monte_carlo::{run_paths, with_workers};

/// Any state component beyond this magnitude aborts the path.
pub const BLOWUP_THRESHOLD: f64 = 1e12;

/// How the step size is chosen at each state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StepPolicy {
    Fixed {
        h: f64,
    },
    /// `h = clamp(level_fraction · level / (1 + level), h_min, h_max)`, then
    /// capped by `h_max · (1 + ‖x‖²) / level` where the coefficients grow
    /// faster than linearly, so the relative step stays bounded far from Λ.
    LevelAdaptive {
        h_max: f64,
        h_min: f64,
        level_fraction: f64,
    },
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy::LevelAdaptive {
            h_max: 1e-3,
            h_min: 1e-8,
            level_fraction: 0.01,
        }
    }
}

impl StepPolicy {
    pub fn fixed(h: f64) -> Self {
        StepPolicy::Fixed { h }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        match *self {
            StepPolicy::Fixed { h } if ok(h) => Ok(()),
            StepPolicy::Fixed { h } => Err(Error::invalid(format!("fixed step must be positive, got {h}"))),
            StepPolicy::LevelAdaptive {
                h_max,
                h_min,
                level_fraction,
            } => {
                if !(ok(h_max) && ok(h_min) && ok(level_fraction)) {
                    return Err(Error::invalid("adaptive policy parameters must be positive and finite"));
                }
                if h_min > h_max {
                    return Err(Error::invalid(format!("h_min {h_min} exceeds h_max {h_max}")));
                }
                Ok(())
            }
        }
    }

    /// Step size to take from state `x` at the given level.
    pub fn step(&self, level: f64, x: &[f64]) -> f64 {
        match *self {
            StepPolicy::Fixed { h } => h,
            StepPolicy::LevelAdaptive {
                h_max,
                h_min,
                level_fraction,
            } => {
                let growth = (1.0 + crate::coefficients::sum_squares(x)) / level;
                (level_fraction * level / (1.0 + level)).clamp(h_min, h_max).min(h_max * growth)
            }
        }
    }

    /// Largest step the policy can take.
    pub fn h_max(&self) -> f64 {
        match *self {
            StepPolicy::Fixed { h } => h,
            StepPolicy::LevelAdaptive { h_max, .. } => h_max,
        }
    }
}

/// Identifies one path's random stream: ChaCha8 seeded with `master`,
/// stream `2·index` for Brownian increments and `2·index + 1` for auxiliary
/// draws such as bridge-crossing tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathSeed {
    pub master: u64,
    pub index: u64,
}

impl PathSeed {
    pub fn new(master: u64, index: u64) -> Self {
        PathSeed { master, index }
    }

    pub fn noise_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(2 * self.index);
        rng
    }

    pub fn aux_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(2 * self.index + 1);
        rng
    }
}

impl From<u64> for PathSeed {
    fn from(master: u64) -> Self {
        PathSeed::new(master, 0)
    }
}

/// `x + σ(x)·dW + b(x)·h`.
pub fn em_step(field: &CoefficientField, x: &[f64], h: f64, dw: &[f64]) -> Result<Vec<f64>> {
    field.check_point(x)?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("step must be positive, got {h}")));
    }
    if dw.len() != field.m() {
        return Err(Error::invalid(format!(
            "increment has dimension {}, field has m = {}",
            dw.len(),
            field.m()
        )));
    }
    if dw.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("increment has a non-finite component"));
    }
    let mut ev = field.evaluator();
    ev.eval(x);
    let mut out = vec![0.0; x.len()];
    em_update(&ev, x, h, dw, &mut out);
    Ok(out)
}

/// Euler–Maruyama update using coefficients already evaluated at `x`.
pub(crate) fn em_update(ev: &Evaluator<'_>, x: &[f64], h: f64, dw: &[f64], out: &mut [f64]) {
    let m = dw.len();
    let sigma = ev.sigma();
    let drift = ev.drift();
    for i in 0..x.len() {
        let row = &sigma[i * m..(i + 1) * m];
        let noise: f64 = row.iter().zip(dw).map(|(s, w)| s * w).sum();
        out[i] = x[i] + noise + drift[i] * h;
    }
}

/// One Euler–Maruyama step as seen by a path observer.
#[derive(Debug)]
pub struct Segment<'a> {
    pub index: usize,
    pub t0: f64,
    pub t1: f64,
    pub x0: &'a [f64],
    pub x1: &'a [f64],
    pub level0: f64,
    pub level1: f64,
    pub dw: &'a [f64],
}

impl Segment<'_> {
    /// Linear interpolation of the state at `t ∈ [t0, t1]`.
    pub fn state_at(&self, t: f64) -> Vec<f64> {
        let w = if self.t1 > self.t0 { (t - self.t0) / (self.t1 - self.t0) } else { 1.0 };
        self.x0.iter().zip(self.x1).map(|(a, b)| a + w * (b - a)).collect()
    }
}

/// Why a simulated path stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Termination {
    Horizon,
    /// Level fell to `lambda_tol` after `step` steps; the state is frozen there.
    Absorbed { step: usize },
    /// The observer asked to stop after `step` steps.
    Stopped { step: usize },
}

/// Runs one path, calling `visit` after every step.
///
/// Returns the termination reason and the level at `start`. A start
/// already in Λ terminates immediately as absorbed at step 0.
pub fn simulate_with<R, F>(
    field: &CoefficientField,
    start: &[f64],
    horizon: f64,
    policy: &StepPolicy,
    rng: &mut R,
    mut visit: F,
) -> Result<(Termination, f64)>
where
    R: Rng + ?Sized,
    F: FnMut(&Segment<'_>) -> ControlFlow<()>,
{
    field.check_point(start)?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
    }
    policy.validate()?;

    let tol = field.lambda_tol();
    let mut ev = field.evaluator();
    let mut x0 = start.to_vec();
    let mut x1 = vec![0.0; field.d()];
    let mut dw = vec![0.0; field.m()];
    let mut l0 = ev.eval(&x0);
    let start_level = l0;
    if l0 <= tol {
        return Ok((Termination::Absorbed { step: 0 }, start_level));
    }

    let snap = horizon * 1e-12;
    let mut t = 0.0;
    let mut i = 0usize;
    loop {
        let h_try = policy.step(l0, &x0);
        let t1 = if t + h_try >= horizon - snap { horizon } else { t + h_try };
        let h = t1 - t;
        let sd = h.sqrt();
        for w in dw.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *w = sd * z;
        }
        em_update(&ev, &x0, h, &dw, &mut x1);
        if x1.iter().any(|v| !v.is_finite() || v.abs() > BLOWUP_THRESHOLD) {
            return Err(Error::NumericalBlowup {
                step: i,
                path_index: None,
                seed: None,
            });
        }
        let l1 = ev.eval(&x1);
        let seg = Segment {
            index: i,
            t0: t,
            t1,
            x0: &x0,
            x1: &x1,
            level0: l0,
            level1: l1,
            dw: &dw,
        };
        let flow = visit(&seg);
        i += 1;
        if flow.is_break() {
            return Ok((Termination::Stopped { step: i }, start_level));
        }
        t = t1;
        std::mem::swap(&mut x0, &mut x1);
        l0 = l1;
        if l0 <= tol {
            return Ok((Termination::Absorbed { step: i }, start_level));
        }
        if t >= horizon {
            return Ok((Termination::Horizon, start_level));
        }
    }
}

/// A stored discretized trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRealization {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// `levels[i] = level(states[i])`.
    pub levels: Vec<f64>,
    /// `increments[i]` moved `states[i]` to `states[i + 1]`.
    pub increments: Vec<Vec<f64>>,
    pub seed: PathSeed,
    pub step_policy: StepPolicy,
    pub horizon: f64,
    pub termination: Termination,
}

/// Simulates and stores one path; `seed` may be a bare master seed (path 0).
pub fn simulate_path(
    field: &CoefficientField,
    start: &[f64],
    horizon: f64,
    policy: &StepPolicy,
    seed: impl Into<PathSeed>,
) -> Result<PathRealization> {
    let seed = seed.into();
    let mut rng = seed.noise_rng();
    let mut times = vec![0.0];
    let mut states = vec![start.to_vec()];
    let mut levels = Vec::new();
    let mut increments = Vec::new();
    let (termination, l0) = simulate_with(field, start, horizon, policy, &mut rng, |seg| {
        times.push(seg.t1);
        states.push(seg.x1.to_vec());
        levels.push(seg.level1);
        increments.push(seg.dw.to_vec());
        ControlFlow::Continue(())
    })
    .map_err(|e| e.with_path(seed.index, seed.master))?;
    levels.insert(0, l0);
    Ok(PathRealization {
        times,
        states,
        levels,
        increments,
        seed,
        step_policy: *policy,
        horizon,
        termination,
    })
}

impl PathRealization {
    /// Builds a path from externally supplied samples; increments are left
    /// zero. Useful for replaying recorded data through the crossing detectors.
    pub fn from_states(field: &CoefficientField, times: Vec<f64>, states: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != states.len() {
            return Err(Error::invalid("times and states must be nonempty and of equal length"));
        }
        if times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("times must start at 0 and be strictly increasing"));
        }
        let levels = states.iter().map(|s| field.level(s)).collect::<Result<Vec<_>>>()?;
        let horizon = *times.last().unwrap();
        Ok(PathRealization {
            increments: vec![vec![0.0; field.m()]; times.len() - 1],
            times,
            states,
            levels,
            seed: PathSeed::new(0, 0),
            step_policy: StepPolicy::Fixed { h: horizon.max(f64::MIN_POSITIVE) },
            horizon: horizon.max(f64::MIN_POSITIVE),
            termination: Termination::Horizon,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> &[f64] {
        &self.states[0]
    }

    /// Linearly interpolated state at time `t`; the last state past the end.
    pub fn state_at(&self, t: f64) -> Vec<f64> {
        let i = self.times.partition_point(|&s| s <= t);
        if i == 0 {
            return self.states[0].clone();
        }
        if i >= self.times.len() {
            return self.states[self.times.len() - 1].clone();
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = (t - t0) / (t1 - t0);
        self.states[i - 1]
            .iter()
            .zip(&self.states[i])
            .map(|(a, b)| a + w * (b - a))
            .collect()
    }

    /// Writes `t, x_1..x_d, level` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.states[0].len();
        let mut header = vec!["t".to_string()];
        header.extend((1..=d).map(|i| format!("x_{i}")));
        header.push("level".into());
        w.write_record(&header)?;
        for ((t, x), l) in self.times.iter().zip(&self.states).zip(&self.levels) {
            let mut row = vec![t.to_string()];
            row.extend(x.iter().map(f64::to_string));
            row.push(l.to_string());
            w.write_record(&row)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::FieldSpec;
    use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

    fn constant(sigma: f64, drift: f64) -> CoefficientField {
        FieldSpec::Constant {
            sigma: vec![vec![sigma]],
            drift: vec![drift],
        }
        .build()
        .unwrap()
    }

    #[test]
    fn em_step_examples() {
        let f = constant(0.0, 3.0);
        assert_eq!(em_step(&f, &[1.0], 0.5, &[0.7]).unwrap(), vec![2.5]);
        let g = constant(1.0, 0.0);
        assert_eq!(em_step(&g, &[1.25], 0.1, &[0.0]).unwrap(), vec![1.25]);
        let gbm = FieldSpec::Linear1d {}.build().unwrap();
        let x = em_step(&gbm, &[1.0], 0.01, &[0.1]).unwrap();
        assert!((x[0] - 1.1).abs() < 1e-15);
    }

    #[test]
    fn em_step_dimension_mismatch() {
        let gbm = FieldSpec::Linear1d {}.build().unwrap();
        assert!(em_step(&gbm, &[1.0], 0.01, &[0.1, 0.2]).is_err());
        assert!(em_step(&gbm, &[1.0, 1.0], 0.01, &[0.1]).is_err());
        assert!(em_step(&gbm, &[1.0], 0.0, &[0.1]).is_err());
    }

    #[test]
    fn pure_drift_path() {
        let f = constant(0.0, 1.0);
        let p = simulate_path(&f, &[0.0], 1.0, &StepPolicy::fixed(0.25), 7).unwrap();
        assert_eq!(p.times, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let xs: Vec<f64> = p.states.iter().map(|s| s[0]).collect();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(p.termination, Termination::Horizon);
    }

    #[test]
    fn drift_only_matches_deterministic_euler() {
        let f = FieldSpec::LinearDecay { rate: 0.7, d: 2 }.build().unwrap();
        let p = simulate_path(&f, &[1.0, -2.0], 2.0, &StepPolicy::fixed(0.01), 3).unwrap();
        let mut x = vec![1.0, -2.0];
        for (i, s) in p.states.iter().enumerate().skip(1) {
            let h = p.times[i] - p.times[i - 1];
            x = x.iter().map(|v| v + (-0.7 * v) * h).collect();
            assert_eq!(&x, s);
        }
    }

    #[test]
    fn reproducible_bit_for_bit() {
        let gbm = FieldSpec::Linear1d {}.build().unwrap();
        let policy = StepPolicy::default();
        let a = simulate_path(&gbm, &[1.0], 0.5, &policy, PathSeed::new(11, 4)).unwrap();
        let b = simulate_path(&gbm, &[1.0], 0.5, &policy, PathSeed::new(11, 4)).unwrap();
        assert_eq!(a, b);
        let c = simulate_path(&gbm, &[1.0], 0.5, &policy, PathSeed::new(11, 5)).unwrap();
        assert_ne!(a.states, c.states);
    }

    #[test]
    fn times_strictly_increase_and_increments_align() {
        let f = FieldSpec::DiagonalLinear { d: 2 }.build().unwrap();
        let p = simulate_path(&f, &[1.0, 0.5], 0.3, &StepPolicy::default(), 2).unwrap();
        assert!(p.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(p.states[0], vec![1.0, 0.5]);
        assert_eq!(p.increments.len() + 1, p.states.len());
        assert_eq!(*p.times.last().unwrap(), 0.3);
        for i in 0..p.increments.len() {
            let next = em_step(&f, &p.states[i], p.times[i + 1] - p.times[i], &p.increments[i]).unwrap();
            assert_eq!(next, p.states[i + 1]);
        }
    }

    #[test]
    fn increments_have_step_variance() {
        let f = constant(1.0, 0.0);
        let p = simulate_path(&f, &[0.0], 100.0, &StepPolicy::fixed(0.01), 5).unwrap();
        let n = p.increments.len() as f64;
        let var: f64 = p
            .increments
            .iter()
            .zip(p.times.windows(2))
            .map(|(w, t)| w[0] * w[0] / (t[1] - t[0]))
            .sum::<f64>()
            / n;
        // normalized squares have mean 1 and sd √(2/n) ≈ 0.014
        assert!((var - 1.0).abs() < 0.06, "{var}");
    }

    #[test]
    fn absorption_freezes_path() {
        // a deterministic contraction that lands exactly on 0
        let f = FieldSpec::LinearDecay { rate: 1.0, d: 1 }.build().unwrap();
        let p = simulate_path(&f, &[1.0], 5.0, &StepPolicy::fixed(1.0), 0).unwrap();
        assert_eq!(p.termination, Termination::Absorbed { step: 1 });
        assert_eq!(p.states, vec![vec![1.0], vec![0.0]]);

        let gbm = FieldSpec::Linear1d {}.build().unwrap();
        let q = simulate_path(&gbm, &[0.0], 1.0, &StepPolicy::fixed(0.1), 0).unwrap();
        assert_eq!(q.termination, Termination::Absorbed { step: 0 });
        assert_eq!(q.states.len(), 1);
    }

    #[test]
    fn blowup_reports_step() {
        let f = CoefficientField::scalar("explode", |_| 0.0, |x| x * x).unwrap();
        let err = simulate_path(&f, &[10.0], 10.0, &StepPolicy::fixed(0.1), 0).unwrap_err();
        assert!(matches!(err, Error::NumericalBlowup { step, .. } if step > 0));
    }

    #[test]
    fn adaptive_step_shrinks_near_lambda() {
        let p = StepPolicy::LevelAdaptive {
            h_max: 1e-2,
            h_min: 1e-6,
            level_fraction: 0.1,
        };
        assert_eq!(p.step(1e3, &[40.0]), 1e-2);
        assert!((p.step(1e-3, &[1e-3]) - 0.1 * 1e-3 / 1.001).abs() < 1e-18);
        assert_eq!(p.step(1e-9, &[1e-9]), 1e-6);
        // superlinear growth: level 1e6 at x = 100 caps h at h_max·(1 + 1e4)/1e6
        assert!((p.step(1e6, &[100.0]) - 1e-2 * 10001.0 / 1e6).abs() < 1e-15);
        assert!(StepPolicy::LevelAdaptive {
            h_max: 1e-3,
            h_min: 1e-2,
            level_fraction: 0.1
        }
        .validate()
        .is_err());
    }

    #[test]
    fn constant_coefficient_terminal_law_chi_squared() {
        let f = constant(1.0, 0.0);
        let horizon: f64 = 0.8;
        let n = 10_000;
        let bins = 20;
        let normal = Normal::new(0.0, horizon.sqrt()).unwrap();
        let mut counts = vec![0usize; bins];
        let policy = StepPolicy::fixed(0.1);
        for i in 0..n {
            let p = simulate_path(&f, &[0.0], horizon, &policy, PathSeed::new(99, i)).unwrap();
            let u = normal.cdf(p.states.last().unwrap()[0]);
            counts[((u * bins as f64) as usize).min(bins - 1)] += 1;
        }
        let expected = n as f64 / bins as f64;
        let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        let critical = ChiSquared::new((bins - 1) as f64).unwrap().inverse_cdf(0.99);
        assert!(stat < critical, "chi2 = {stat}, critical = {critical}");
    }

    #[test]
    fn csv_dump_columns() {
        let f = FieldSpec::DiagonalLinear { d: 2 }.build().unwrap();
        let p = simulate_path(&f, &[1.0, 2.0], 0.01, &StepPolicy::fixed(0.005), 1).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,x_1,x_2,level");
        assert_eq!(lines.next().unwrap(), "0,1,2,10");
        assert_eq!(text.lines().count(), 4);
    }
}
