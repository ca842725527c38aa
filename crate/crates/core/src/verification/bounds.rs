//! Checkers for the local estimates behind `P_x[S_k ≤ t] ≤ C√t`.
//!
//! Every checker simulates paths from a start `x` at level `A/2^k`, stops
//! them at the sandwich time `S_k`, and compares a confidence bound on the
//! Monte Carlo left-hand side with the analytic right-hand side. Expectations
//! carry the indicator `1{S_k ≤ 1}` (unconditioned form).

use std::collections::BTreeMap;
use std::ops::ControlFlow;

use serde::ser::{Serialize, SerializeStruct, Serializer};
use serde_json::{json, Value};

use super::{estimate_with_ci, fit_loglog_slope, markov_constant, CiMethod, EstimateWithCI};
use crate::coefficients::{euclidean_distance, CoefficientField, LipschitzSource};
use crate::error::{Error, Result};
use crate::sde_engine::{run_paths, simulate_with, StepPolicy};
use crate::stopping_times::{sandwich_band, CrossingDetector, CrossingMethod, SandwichDetector};

/// Which side of `rhs` the estimate is claimed to lie on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    /// `lhs ≤ rhs`; refuted only if `ci_low > rhs`.
    AtMost,
    /// `lhs ≥ rhs`; refuted only if `ci_high < rhs`.
    AtLeast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheckReport {
    pub bound_name: String,
    pub parameters: BTreeMap<String, Value>,
    pub lhs: EstimateWithCI,
    pub rhs: f64,
    pub relation: Relation,
    /// The bound holds trivially (a probability bounded by something ≥ 1).
    pub vacuous: bool,
}

impl BoundCheckReport {
    pub fn satisfied(&self) -> bool {
        self.vacuous
            || match self.relation {
                Relation::AtMost => self.lhs.ci_low <= self.rhs,
                Relation::AtLeast => self.lhs.ci_high >= self.rhs,
            }
    }

    /// Distance from the point estimate to the bound, positive when on the claimed side.
    pub fn slack(&self) -> f64 {
        match self.relation {
            Relation::AtMost => self.rhs - self.lhs.point,
            Relation::AtLeast => self.lhs.point - self.rhs,
        }
    }

    pub fn parameter(&self, key: &str) -> Option<f64> {
        self.parameters.get(key).and_then(Value::as_f64)
    }
}

impl Serialize for BoundCheckReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(serde::Serialize)]
        struct Lhs {
            point: f64,
            ci_low: f64,
            ci_high: f64,
            n: usize,
            censored_n: usize,
        }
        let mut s = serializer.serialize_struct("BoundCheckReport", 6)?;
        s.serialize_field("bound_name", &self.bound_name)?;
        s.serialize_field("parameters", &self.parameters)?;
        s.serialize_field(
            "lhs",
            &Lhs {
                point: self.lhs.point,
                ci_low: self.lhs.ci_low,
                ci_high: self.lhs.ci_high,
                n: self.lhs.n,
                censored_n: self.lhs.censored_n,
            },
        )?;
        s.serialize_field("rhs", &self.rhs)?;
        s.serialize_field("satisfied", &self.satisfied())?;
        s.serialize_field("slack", &self.slack())?;
        s.end()
    }
}

fn base_parameters(field: &CoefficientField, a: f64, k: u32, n_paths: usize, seed: u64) -> Result<BTreeMap<String, Value>> {
    let bound = field
        .lipschitz()
        .ok_or_else(|| Error::invalid(format!("field `{}` has no Lipschitz bound", field.name())))?;
    let source = match bound.source {
        LipschitzSource::Declared => "declared",
        LipschitzSource::Regional { .. } => "regional",
        LipschitzSource::Estimated { .. } => "estimated",
    };
    Ok(BTreeMap::from([
        ("A".to_string(), json!(a)),
        ("k".to_string(), json!(k)),
        ("m".to_string(), json!(field.m())),
        ("K".to_string(), json!(bound.value)),
        ("K_source".to_string(), json!(source)),
        ("field".to_string(), json!(field.name())),
        ("n_paths".to_string(), json!(n_paths)),
        ("seed".to_string(), json!(seed)),
    ]))
}

fn check_times(t_grid: &[f64], cap: f64) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::invalid("t_grid must be nonempty"));
    }
    if let Some(t) = t_grid.iter().find(|t| !(**t > 0.0 && **t <= cap)) {
        return Err(Error::invalid(format!("time {t} outside (0, {cap}]")));
    }
    Ok(())
}

/// Per path: `S_k` (if it occurs before `horizon`) and `X_{t∧S_k}` for each sorted `t`.
struct StoppedPath {
    s_k: Option<f64>,
    stopped: Vec<Vec<f64>>,
}

#[allow(clippy::too_many_arguments)]
fn stopped_paths(
    field: &CoefficientField,
    x: &[f64],
    a: f64,
    k: u32,
    sorted_t: &[f64],
    horizon: f64,
    policy: &StepPolicy,
    n_paths: usize,
    master_seed: u64,
) -> Result<Vec<StoppedPath>> {
    let l0 = field.level(x)?;
    sandwich_band(l0, a, k)?;
    if n_paths == 0 {
        return Err(Error::invalid("n_paths must be positive"));
    }
    run_paths(n_paths, master_seed, |seed| {
        let mut det = SandwichDetector::new(l0, a, k, CrossingMethod::Interpolated)?;
        let mut stopped: Vec<Vec<f64>> = Vec::with_capacity(sorted_t.len());
        let mut last = x.to_vec();
        let mut rng = seed.noise_rng();
        simulate_with(field, x, horizon, policy, &mut rng, |seg| {
            let s = det.observe(seg.t0, seg.t1, seg.level0, seg.level1);
            let cut = s.unwrap_or(seg.t1);
            while stopped.len() < sorted_t.len() && sorted_t[stopped.len()] <= cut {
                stopped.push(seg.state_at(sorted_t[stopped.len()]));
            }
            if let Some(s) = s {
                let at_s = seg.state_at(s);
                stopped.resize(sorted_t.len(), at_s);
                return ControlFlow::Break(());
            }
            last.copy_from_slice(seg.x1);
            ControlFlow::Continue(())
        })?;
        stopped.resize(sorted_t.len(), last);
        Ok(StoppedPath {
            s_k: det.found(),
            stopped,
        })
    })
}

/// Displacement and level-change reports for one `t`, computed on shared paths.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalBoundPair {
    pub displacement: BoundCheckReport,
    pub level_change: BoundCheckReport,
}

/// Runs both local checks for every `t` in `t_grid` on one batch of paths:
///
/// * displacement: `E[‖x − X_{t∧S_k}‖²·1{S_k ≤ 1}] ≤ (m+1)·(A/2^{k−1})·t`;
/// * level change: `E[|level(x) − level(X_{t∧S_k})|·1{S_k ≤ 1}] ≤
///   2·(3A/2^k)^{1/2}·K·(displacement)^{1/2}`, with the displacement taken
///   at its upper confidence bound.
#[allow(clippy::too_many_arguments)]
pub fn check_local_bounds(
    field: &CoefficientField,
    x: &[f64],
    a: f64,
    k: u32,
    t_grid: &[f64],
    n_paths: usize,
    policy: &StepPolicy,
    master_seed: u64,
) -> Result<Vec<LocalBoundPair>> {
    check_times(t_grid, 1.0)?;
    let k_lip = field.lipschitz_k()?;
    let params = base_parameters(field, a, k, n_paths, master_seed)?;
    let mut order: Vec<usize> = (0..t_grid.len()).collect();
    order.sort_by(|&i, &j| t_grid[i].total_cmp(&t_grid[j]));
    let sorted: Vec<f64> = order.iter().map(|&i| t_grid[i]).collect();

    let paths = stopped_paths(field, x, a, k, &sorted, 1.0, policy, n_paths, master_seed)?;
    let lx = field.level(x)?;
    let mut ev = field.evaluator();
    let censored = paths.iter().filter(|p| p.s_k.is_none()).count();

    let mid = a / 2f64.powi(k as i32);
    let upper = 2.0 * mid;
    let m = field.m() as f64;
    let mut out: Vec<Option<LocalBoundPair>> = vec![None; t_grid.len()];
    for (slot, &orig) in order.iter().enumerate() {
        let t = sorted[slot];
        let mut disp = Vec::with_capacity(n_paths);
        let mut dlev = Vec::with_capacity(n_paths);
        for p in &paths {
            if p.s_k.is_some() {
                let xs = &p.stopped[slot];
                disp.push(euclidean_distance(x, xs).powi(2));
                dlev.push((lx - ev.level(xs)).abs());
            } else {
                disp.push(0.0);
                dlev.push(0.0);
            }
        }
        let mut params_t = params.clone();
        params_t.insert("t".into(), json!(t));

        let disp_est = EstimateWithCI::from_samples(&disp, censored)?;
        let displacement = BoundCheckReport {
            bound_name: "displacement".into(),
            parameters: params_t.clone(),
            rhs: (m + 1.0) * upper * t,
            lhs: disp_est.clone(),
            relation: Relation::AtMost,
            vacuous: false,
        };
        let level_change = BoundCheckReport {
            bound_name: "level-change".into(),
            parameters: params_t,
            lhs: EstimateWithCI::from_samples(&dlev, censored)?,
            rhs: 2.0 * (lx.max(mid) + upper).sqrt() * k_lip * disp_est.ci_high.max(0.0).sqrt(),
            relation: Relation::AtMost,
            vacuous: false,
        };
        out[orig] = Some(LocalBoundPair {
            displacement,
            level_change,
        });
    }
    Ok(out.into_iter().map(Option::unwrap).collect())
}

/// `E[‖x − X_{t∧S_k}‖²·1{S_k ≤ 1}] ≤ (m+1)·(A/2^{k−1})·t` at a single `t ≤ 1`.
#[allow(clippy::too_many_arguments)]
pub fn check_displacement_bound(
    field: &CoefficientField,
    x: &[f64],
    a: f64,
    k: u32,
    t: f64,
    n_paths: usize,
    policy: &StepPolicy,
    master_seed: u64,
) -> Result<BoundCheckReport> {
    let mut pairs = check_local_bounds(field, x, a, k, &[t], n_paths, policy, master_seed)?;
    Ok(pairs.remove(0).displacement)
}

/// The level-change estimate at a single `t ≤ 1`; see [`check_local_bounds`].
#[allow(clippy::too_many_arguments)]
pub fn check_level_change_bound(
    field: &CoefficientField,
    x: &[f64],
    a: f64,
    k: u32,
    t: f64,
    n_paths: usize,
    policy: &StepPolicy,
    master_seed: u64,
) -> Result<BoundCheckReport> {
    let mut pairs = check_local_bounds(field, x, a, k, &[t], n_paths, policy, master_seed)?;
    Ok(pairs.remove(0).level_change)
}

/// `P[S_k ≤ t] ≤ C√t` for each `t` in `t_grid`, Wilson intervals.
/// Points with `C√t ≥ 1` are marked vacuous.
#[allow(clippy::too_many_arguments)]
pub fn check_sqrt_escape_bound(
    field: &CoefficientField,
    x: &[f64],
    a: f64,
    k: u32,
    t_grid: &[f64],
    n_paths: usize,
    policy: &StepPolicy,
    master_seed: u64,
) -> Result<Vec<BoundCheckReport>> {
    check_times(t_grid, 1.0)?;
    let c = markov_constant(field.m(), field.lipschitz_k()?);
    let mut params = base_parameters(field, a, k, n_paths, master_seed)?;
    params.insert("C".into(), json!(c));
    let horizon = t_grid.iter().copied().fold(0.0, f64::max);
    let mut s_k: Vec<Option<f64>> = stopped_paths(field, x, a, k, &[], horizon, policy, n_paths, master_seed)?
        .into_iter()
        .map(|p| p.s_k)
        .collect();
    s_k.sort_by(|a, b| a.unwrap_or(f64::INFINITY).total_cmp(&b.unwrap_or(f64::INFINITY)));
    let censored = s_k.iter().filter(|s| s.is_none()).count();
    t_grid
        .iter()
        .map(|&t| {
            let hits = s_k.partition_point(|s| s.is_some_and(|v| v <= t));
            let rhs = c * t.sqrt();
            let mut p = params.clone();
            p.insert("t".into(), json!(t));
            Ok(BoundCheckReport {
                bound_name: "sqrt-escape".into(),
                parameters: p,
                lhs: estimate_with_ci(hits, n_paths, CiMethod::Wilson)?.with_censored(censored),
                rhs,
                relation: Relation::AtMost,
                vacuous: rhs >= 1.0,
            })
        })
        .collect()
}

/// Slope of `ln P̂[S_k ≤ t]` against `ln t` over informative points with a
/// positive estimate. `None` when fewer than two such points exist, which
/// happens when escapes are too rare to observe at the sampled `t`.
pub fn fitted_escape_exponent(reports: &[BoundCheckReport]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = reports
        .iter()
        .filter(|r| !r.vacuous)
        .filter_map(|r| Some((r.parameter("t")?, r.lhs.point)))
        .collect();
    fit_loglog_slope(&pts)
}

/// `P[T_{A/2^{k+1}} ≥ t₀] ≥ 1/2` for starts at level `≥ A/2^k`.
///
/// Path `i` starts at `starts[i % starts.len()]`. The claim is refuted only
/// if the upper confidence bound falls below 1/2.
#[allow(clippy::too_many_arguments)]
pub fn check_halving_persistence(
    field: &CoefficientField,
    starts: &[Vec<f64>],
    a: f64,
    k: u32,
    t0: f64,
    n_paths: usize,
    policy: &StepPolicy,
    master_seed: u64,
) -> Result<BoundCheckReport> {
    if starts.is_empty() {
        return Err(Error::invalid("no start points given"));
    }
    if !(t0 > 0.0 && t0 < 1.0) {
        return Err(Error::invalid(format!("t0 must lie in (0, 1), got {t0}")));
    }
    if !(a > 0.0 && a.is_finite()) || n_paths == 0 {
        return Err(Error::invalid("need A > 0 and n_paths > 0"));
    }
    let floor = a / 2f64.powi(k as i32);
    let levels = starts.iter().map(|s| field.level(s)).collect::<Result<Vec<_>>>()?;
    if let Some(l) = levels.iter().find(|&&l| l < floor * (1.0 - 1e-12)) {
        return Err(Error::invalid(format!("start level {l} is below A/2^k = {floor}")));
    }
    let target = floor / 2.0;
    let persisted = run_paths(n_paths, master_seed, |seed| {
        let j = (seed.index % starts.len() as u64) as usize;
        let mut det = CrossingDetector::new(target, levels[j], CrossingMethod::Interpolated);
        let mut rng = seed.noise_rng();
        simulate_with(field, &starts[j], t0, policy, &mut rng, |seg| {
            match det.observe(seg.t0, seg.t1, seg.level0, seg.level1, None) {
                Some(_) => ControlFlow::Break(()),
                None => ControlFlow::Continue(()),
            }
        })?;
        Ok(det.found().is_none_or(|t| t >= t0))
    })?;
    let successes = persisted.iter().filter(|&&p| p).count();
    let mut params = base_parameters(field, a, k, n_paths, master_seed)?;
    params.insert("t0".into(), json!(t0));
    params.insert("starts".into(), json!(starts.len()));
    Ok(BoundCheckReport {
        bound_name: "halving-persistence".into(),
        parameters: params,
        lhs: estimate_with_ci(successes, n_paths, CiMethod::Wilson)?.with_censored(successes),
        rhs: 0.5,
        relation: Relation::AtLeast,
        vacuous: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::FieldSpec;
    use crate::verification::t0_threshold;

    fn constant_field() -> CoefficientField {
        FieldSpec::Constant {
            sigma: vec![vec![0.6, 0.8]],
            drift: vec![0.0],
        }
        .build()
        .unwrap()
    }

    #[test]
    fn constant_field_has_zero_lhs_everywhere() {
        let f = constant_field();
        // level 1 = A/2^k with A = 2, k = 1
        let p = StepPolicy::fixed(1e-2);
        for pair in check_local_bounds(&f, &[0.3], 2.0, 1, &[0.01, 0.1, 1.0], 100, &p, 0).unwrap() {
            for r in [pair.displacement, pair.level_change] {
                assert_eq!((r.lhs.point, r.lhs.ci_low), (0.0, 0.0));
                assert!(r.satisfied());
                assert_eq!(r.lhs.censored_n, 100);
            }
        }
        for r in check_sqrt_escape_bound(&f, &[0.3], 2.0, 1, &[0.1, 0.5], 100, &p, 0).unwrap() {
            assert_eq!(r.lhs.point, 0.0);
            assert!(r.satisfied());
        }
        let r = check_halving_persistence(&f, &[vec![0.3]], 2.0, 1, 0.25, 100, &p, 0).unwrap();
        assert_eq!(r.lhs.point, 1.0);
        assert!(r.satisfied());
    }

    #[test]
    fn constant_level_under_drift_never_escapes() {
        let f = FieldSpec::Constant {
            sigma: vec![vec![0.0]],
            drift: vec![0.5],
        }
        .build()
        .unwrap();
        // drift moves x but level stays 0.25 everywhere, so S_k never happens
        let r = check_displacement_bound(&f, &[0.0], 0.5, 1, 0.5, 100, &StepPolicy::fixed(0.1), 1).unwrap();
        assert_eq!(r.lhs.point, 0.0);
        assert!(r.satisfied());
    }

    #[test]
    fn vacuous_points_are_flagged() {
        let gbm = FieldSpec::Linear1d {}.build().unwrap();
        let reports =
            check_sqrt_escape_bound(&gbm, &[0.5f64.sqrt()], 1.0, 1, &[0.001, 0.01], 200, &StepPolicy::fixed(1e-3), 3)
                .unwrap();
        assert!(!reports[0].vacuous);
        assert!(reports[1].vacuous && reports[1].satisfied());
        assert!((reports[0].rhs - 0.438).abs() < 1e-3);
    }

    #[test]
    fn checkers_validate_inputs() {
        let gbm = FieldSpec::Linear1d {}.build().unwrap();
        let p = StepPolicy::default();
        assert!(check_sqrt_escape_bound(&gbm, &[0.7], 1.0, 1, &[], 10, &p, 0).is_err());
        // level 1 is not A/2^k = 0.5
        assert!(check_displacement_bound(&gbm, &[1.0], 1.0, 1, 0.1, 10, &p, 0).is_err());
        assert!(check_displacement_bound(&gbm, &[0.5f64.sqrt()], 1.0, 1, 1.5, 10, &p, 0).is_err());
        assert!(check_halving_persistence(&gbm, &[], 1.0, 0, 0.01, 10, &p, 0).is_err());
        assert!(check_halving_persistence(&gbm, &[vec![0.1]], 1.0, 0, 0.01, 10, &p, 0).is_err());
    }

    #[test]
    fn persistence_negative_control_fails() {
        // level = c²x² e^{−2ct} halves at ln2/(2c) = t0/2
        let t0 = t0_threshold(markov_constant(1, 1.0));
        let rate = 2f64.ln() / t0;
        let f = FieldSpec::LinearDecay { rate, d: 1 }.build().unwrap();
        let x = [1.0];
        let a = f.level(&x).unwrap();
        let r = check_halving_persistence(&f, &[x.to_vec()], a, 0, t0, 200, &StepPolicy::fixed(t0 / 1000.0), 0).unwrap();
        assert_eq!(r.lhs.point, 0.0);
        assert!(!r.satisfied());
    }

    #[test]
    fn report_json_shape() {
        let f = constant_field();
        let r = check_displacement_bound(&f, &[0.0], 2.0, 1, 0.5, 100, &StepPolicy::fixed(0.1), 0).unwrap();
        let text = serde_json::to_string(&r).unwrap();
        let order = |keys: &[&str]| {
            let pos: Vec<usize> = keys.iter().map(|k| text.find(&format!("\"{k}\":")).unwrap()).collect();
            assert!(pos.windows(2).all(|w| w[0] < w[1]), "{text}");
        };
        order(&["bound_name", "parameters", "lhs", "rhs", "satisfied", "slack"]);
        order(&["point", "ci_low", "ci_high", "n", "censored_n"]);
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v.as_object().unwrap().len(), 6);
        assert_eq!(v["lhs"].as_object().unwrap().len(), 5);
        assert_eq!(v["satisfied"], json!(true));
        assert_eq!(v["parameters"]["t"], json!(0.5));
    }
}
