//! First passages of the level function, the sandwich times
//! `S_k = T_{A/2^{k+1}} ∧ T_{A/2^{k−1}}` and the dyadic escape decomposition
//! `Σ_k (T_{A/2^{k+1}} − T_{A/2^k})`.
//!
//! Crossings are located on the piecewise-linear interpolant of the level
//! sampled along a path. Anything that does not happen before the horizon
//! is reported as censored, never as infinite.

use std::io::Write;
use std::ops::ControlFlow;

use rand::Rng;
use serde::Serialize;

use crate::coefficients::{CoefficientField, Evaluator};
use crate::error::{Error, Result};
use crate::sde_engine::{run_paths, simulate_with, PathRealization, PathSeed, Segment, StepPolicy};
use crate::verification::{markov_constant, t0_threshold};

/// Relative tolerance for "the path starts at level `A/2^k`".
pub const START_LEVEL_RTOL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrossingMethod {
    /// First grid time at or beyond the threshold.
    Grid,
    /// Linear crossing of the level inside the step.
    #[default]
    Interpolated,
    /// Interpolated, plus a randomized Brownian-bridge test for excursions
    /// past the threshold between two grid points on the near side. 1-D only.
    BridgeCorrected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CrossingTime {
    At { t: f64 },
    Censored { horizon: f64 },
}

/// A first-passage record for one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelCrossing {
    pub threshold: f64,
    pub time: CrossingTime,
    pub direction: Direction,
    pub method: CrossingMethod,
}

impl LevelCrossing {
    pub fn time(&self) -> Option<f64> {
        match self.time {
            CrossingTime::At { t } => Some(t),
            CrossingTime::Censored { .. } => None,
        }
    }

    pub fn is_censored(&self) -> bool {
        matches!(self.time, CrossingTime::Censored { .. })
    }

    /// The crossing time, or the horizon when censored.
    pub fn time_or_horizon(&self) -> f64 {
        match self.time {
            CrossingTime::At { t } => t,
            CrossingTime::Censored { horizon } => horizon,
        }
    }
}

/// Incremental first-passage detector for a single threshold.
#[derive(Debug, Clone)]
pub struct CrossingDetector {
    threshold: f64,
    direction: Direction,
    method: CrossingMethod,
    found: Option<f64>,
}

impl CrossingDetector {
    /// A start exactly at the threshold counts as crossed at time 0.
    pub fn new(threshold: f64, start_level: f64, method: CrossingMethod) -> Self {
        let direction = if start_level < threshold { Direction::Up } else { Direction::Down };
        let found = (start_level == threshold).then_some(0.0);
        CrossingDetector {
            threshold,
            direction,
            method,
            found,
        }
    }

    pub fn found(&self) -> Option<f64> {
        self.found
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Feeds one step. `bridge` carries `(ν², u)`: the local variance rate of
    /// the level and a uniform draw, used only by the bridge method.
    pub fn observe(&mut self, t0: f64, t1: f64, l0: f64, l1: f64, bridge: Option<(f64, f64)>) -> Option<f64> {
        if self.found.is_some() {
            return None;
        }
        let a = self.threshold;
        let crossed = match self.direction {
            Direction::Down => l1 <= a,
            Direction::Up => l1 >= a,
        };
        let t = if crossed {
            match self.method {
                CrossingMethod::Grid => t1,
                _ if l1 == l0 => t1,
                _ => t0 + ((a - l0) / (l1 - l0)).clamp(0.0, 1.0) * (t1 - t0),
            }
        } else {
            match (self.method, bridge) {
                (CrossingMethod::BridgeCorrected, Some((nu2, u))) if nu2 > 0.0 => {
                    let p = (-2.0 * (l0 - a) * (l1 - a) / (nu2 * (t1 - t0))).exp();
                    if u < p {
                        0.5 * (t0 + t1)
                    } else {
                        return None;
                    }
                }
                _ => return None,
            }
        };
        self.found = Some(t);
        self.found
    }

    pub fn finish(&self, horizon: f64) -> LevelCrossing {
        LevelCrossing {
            threshold: self.threshold,
            time: match self.found {
                Some(t) => CrossingTime::At { t },
                None => CrossingTime::Censored { horizon },
            },
            direction: self.direction,
            method: self.method,
        }
    }
}

/// Local variance rate of the level process for a 1-D field at `x`:
/// `(level'(x)·σ(x))²`, with the derivative taken by central differences.
fn level_variance_rate(ev: &mut Evaluator<'_>, x: f64) -> f64 {
    let delta = 1e-6 * x.abs().max(1.0);
    let up = ev.eval(&[x + delta]);
    let down = ev.eval(&[x - delta]);
    ev.eval(&[x]);
    let s = ev.sigma()[0];
    let slope = (up - down) / (2.0 * delta);
    (slope * s).powi(2)
}

fn check_threshold(a: f64) -> Result<()> {
    if a > 0.0 && a.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("threshold must be positive and finite, got {a}")))
    }
}

fn check_bridge(field: &CoefficientField, method: CrossingMethod) -> Result<()> {
    if method == CrossingMethod::BridgeCorrected && (field.d() != 1 || field.m() != 1) {
        return Err(Error::invalid("bridge correction is only available for 1-D fields"));
    }
    Ok(())
}

/// `T_A` on a stored path.
pub fn first_hitting_time(
    path: &PathRealization,
    field: &CoefficientField,
    a: f64,
    method: CrossingMethod,
) -> Result<LevelCrossing> {
    check_threshold(a)?;
    check_bridge(field, method)?;
    let mut det = CrossingDetector::new(a, path.levels[0], method);
    let mut aux = path.seed.aux_rng();
    let mut ev = field.evaluator();
    for i in 0..path.len() - 1 {
        if det.found().is_some() {
            break;
        }
        let bridge = (method == CrossingMethod::BridgeCorrected)
            .then(|| (level_variance_rate(&mut ev, path.states[i][0]), aux.random::<f64>()));
        det.observe(path.times[i], path.times[i + 1], path.levels[i], path.levels[i + 1], bridge);
    }
    Ok(det.finish(path.horizon))
}

/// Band thresholds `(A/2^{k+1}, A/2^{k−1})` after checking that `start_level`
/// is within 5% of `A/2^k`.
pub fn sandwich_band(start_level: f64, a: f64, k: u32) -> Result<(f64, f64)> {
    check_threshold(a)?;
    if k == 0 {
        return Err(Error::invalid("sandwich index k must be >= 1"));
    }
    let mid = a / 2f64.powi(k as i32);
    if ((start_level - mid) / mid).abs() > START_LEVEL_RTOL {
        return Err(Error::invalid(format!(
            "start level {start_level} is not within {}% of A/2^k = {mid}",
            START_LEVEL_RTOL * 100.0
        )));
    }
    Ok((mid / 2.0, mid * 2.0))
}

/// Streaming `S_k` detector: the earlier of the two band-edge passages.
#[derive(Debug, Clone)]
pub struct SandwichDetector {
    lower: CrossingDetector,
    upper: CrossingDetector,
}

impl SandwichDetector {
    pub fn new(start_level: f64, a: f64, k: u32, method: CrossingMethod) -> Result<Self> {
        let (lo, hi) = sandwich_band(start_level, a, k)?;
        Ok(SandwichDetector {
            lower: CrossingDetector::new(lo, start_level, method),
            upper: CrossingDetector::new(hi, start_level, method),
        })
    }

    pub fn observe(&mut self, t0: f64, t1: f64, l0: f64, l1: f64) -> Option<f64> {
        self.lower.observe(t0, t1, l0, l1, None);
        self.upper.observe(t0, t1, l0, l1, None);
        self.found()
    }

    pub fn found(&self) -> Option<f64> {
        match (self.lower.found(), self.upper.found()) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Earlier passage wins; an exact tie resolves to the lower threshold.
    pub fn finish(&self, horizon: f64) -> LevelCrossing {
        match (self.lower.found(), self.upper.found()) {
            (Some(lo), Some(hi)) if hi < lo => self.upper.finish(horizon),
            (None, Some(_)) => self.upper.finish(horizon),
            _ => self.lower.finish(horizon),
        }
    }
}

/// `S_k = T_{A/2^{k+1}} ∧ T_{A/2^{k−1}}` on a stored path that starts at level `A/2^k`.
/// When both passages are censored the lower threshold is reported.
pub fn sandwich_time(path: &PathRealization, a: f64, k: u32, method: CrossingMethod) -> Result<LevelCrossing> {
    if method == CrossingMethod::BridgeCorrected {
        return Err(Error::invalid("sandwich times support grid and interpolated methods"));
    }
    let mut det = SandwichDetector::new(path.levels[0], a, k, method)?;
    for i in 0..path.len() - 1 {
        if det.observe(path.times[i], path.times[i + 1], path.levels[i], path.levels[i + 1]).is_some() {
            break;
        }
    }
    Ok(det.finish(path.horizon))
}

/// `T_A` for `n_paths` independent paths from `start`, each simulated only
/// until its crossing (or the horizon).
#[allow(clippy::too_many_arguments)]
pub fn hitting_time_samples(
    field: &CoefficientField,
    start: &[f64],
    a: f64,
    horizon: f64,
    policy: &StepPolicy,
    method: CrossingMethod,
    n_paths: usize,
    master_seed: u64,
) -> Result<Vec<LevelCrossing>> {
    check_threshold(a)?;
    check_bridge(field, method)?;
    let start_level = field.level(start)?;
    run_paths(n_paths, master_seed, |seed| {
        let mut det = CrossingDetector::new(a, start_level, method);
        if det.found().is_some() {
            return Ok(det.finish(horizon));
        }
        let mut rng = seed.noise_rng();
        let mut aux = seed.aux_rng();
        let mut ev = field.evaluator();
        simulate_with(field, start, horizon, policy, &mut rng, |seg: &Segment<'_>| {
            let bridge = (method == CrossingMethod::BridgeCorrected).then(|| {
                // the rate where a missed crossing would happen: the endpoint nearer the threshold
                let near = if (seg.level0 - a).abs() <= (seg.level1 - a).abs() { seg.x0[0] } else { seg.x1[0] };
                (level_variance_rate(&mut ev, near), aux.random::<f64>())
            });
            match det.observe(seg.t0, seg.t1, seg.level0, seg.level1, bridge) {
                Some(_) => ControlFlow::Break(()),
                None => ControlFlow::Continue(()),
            }
        })?;
        Ok(det.finish(horizon))
    })
}

/// Per-path record of the dyadic escape decomposition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DyadicEscapeRecord {
    /// Start level `A = level(start)`.
    pub a: f64,
    /// `increments[k] = T_{A/2^{k+1}} − T_{A/2^k}`; `None` once censored.
    pub increments: Vec<Option<f64>>,
    pub t0: f64,
    pub count_ge_t0: usize,
}

impl DyadicEscapeRecord {
    pub fn new(a: f64, increments: Vec<Option<f64>>, t0: f64) -> Self {
        let count_ge_t0 = increments.iter().flatten().filter(|&&v| v >= t0).count();
        DyadicEscapeRecord {
            a,
            increments,
            t0,
            count_ge_t0,
        }
    }

    pub fn censored_count(&self) -> usize {
        self.increments.iter().filter(|v| v.is_none()).count()
    }
}

/// Simulates one path from `start` and records how long each halving of the
/// level takes, for `depth` halvings. `T_{A/2⁰}` is 0.
pub fn dyadic_escape(
    field: &CoefficientField,
    start: &[f64],
    depth: usize,
    horizon: f64,
    policy: &StepPolicy,
    seed: impl Into<PathSeed>,
) -> Result<DyadicEscapeRecord> {
    let seed = seed.into();
    if depth == 0 {
        return Err(Error::invalid("dyadic escape depth must be >= 1"));
    }
    let a = field.level(start)?;
    if a <= field.lambda_tol() {
        return Err(Error::invalid("start point lies in Lambda"));
    }
    let t0 = t0_threshold(markov_constant(field.m(), field.lipschitz_k()?));
    let thresholds: Vec<f64> = (1..=depth).map(|j| a / 2f64.powi(j as i32)).collect();
    let mut times: Vec<f64> = Vec::with_capacity(depth);
    let mut rng = seed.noise_rng();
    simulate_with(field, start, horizon, policy, &mut rng, |seg| {
        while times.len() < depth {
            let mut det = CrossingDetector::new(thresholds[times.len()], seg.level0, CrossingMethod::Interpolated);
            match det.found().or_else(|| det.observe(seg.t0, seg.t1, seg.level0, seg.level1, None)) {
                Some(t) => times.push(t.max(seg.t0)),
                None => break,
            }
        }
        if times.len() == depth {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })
    .map_err(|e| e.with_path(seed.index, seed.master))?;
    let increments = (0..depth)
        .map(|k| {
            times.get(k).map(|&t| {
                let prev = if k == 0 { 0.0 } else { times[k - 1] };
                t - prev
            })
        })
        .collect();
    Ok(DyadicEscapeRecord::new(a, increments, t0))
}

/// [`dyadic_escape`] for path indices `0..n_paths`.
pub fn dyadic_escape_batch(
    field: &CoefficientField,
    start: &[f64],
    depth: usize,
    horizon: f64,
    policy: &StepPolicy,
    n_paths: usize,
    master_seed: u64,
) -> Result<Vec<DyadicEscapeRecord>> {
    run_paths(n_paths, master_seed, |seed| dyadic_escape(field, start, depth, horizon, policy, seed))
}

/// One row per `(path, k)`: `path_id, k, increment, censored, ge_t0`.
/// Censored increments leave the `increment` cell empty.
pub fn write_dyadic_csv<W: Write>(records: &[DyadicEscapeRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["path_id", "k", "increment", "censored", "ge_t0"])?;
    for (path_id, rec) in records.iter().enumerate() {
        for (k, inc) in rec.increments.iter().enumerate() {
            let (value, censored, ge) = match inc {
                Some(v) => (v.to_string(), false, *v >= rec.t0),
                None => (String::new(), true, false),
            };
            w.write_record([path_id.to_string(), k.to_string(), value, censored.to_string(), ge.to_string()])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
