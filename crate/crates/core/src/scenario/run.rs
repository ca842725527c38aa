use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use super::{Experiment, ScenarioConfig, DEFAULT_ENGINE_EXPONENTS, DEFAULT_LOCAL_T_GRID, DEFAULT_SQRT_GRID_BELOW};
use crate::coefficients::CoefficientField;
use crate::error::{Error, Result};
use crate::sde_engine::{simulate_path, strong_order_study, with_workers, PathRealization, PathSeed, StrongOrderStudy};
use crate::stopping_times::{dyadic_escape_batch, write_dyadic_csv, DyadicEscapeRecord};
use crate::verification::{
    accessibility_integral_1d, check_halving_persistence, check_local_bounds, check_sqrt_escape_bound,
    default_t_grid, estimate_lambda_hitting, fitted_escape_exponent, markov_constant, t0_threshold, Accessibility,
    BoundCheckReport, EstimateWithCI,
};

/// Number of leading paths dumped when `debug_paths` is set.
const DEBUG_PATH_COUNT: u64 = 10;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Directory for `report.json` and `table_*.csv`; nothing is written when `None`.
    pub out_dir: Option<PathBuf>,
    /// Size of a dedicated worker pool; the global rayon pool when `None`.
    pub workers: Option<usize>,
    pub debug_paths: bool,
}

/// Non-reproducible metadata. Nothing else in a report depends on time or scheduling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportHeader {
    pub artifact_version: String,
    pub timestamp_unix: u64,
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DyadicSummaryRow {
    pub k: usize,
    /// Mean over paths where this increment was observed.
    pub mean_increment: Option<f64>,
    pub observed: usize,
    pub censored: usize,
    pub ge_t0: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum Payload {
    Hitting {
        horizon: f64,
        eps_grid: Vec<f64>,
        estimates: Vec<EstimateWithCI>,
    },
    BoundChecks {
        reports: Vec<BoundCheckReport>,
        #[serde(skip_serializing_if = "Option::is_none")]
        fitted_exponent: Option<f64>,
    },
    DyadicEscape {
        a: f64,
        t0: f64,
        summary: Vec<DyadicSummaryRow>,
        #[serde(skip)]
        records: Vec<DyadicEscapeRecord>,
    },
    #[serde(rename = "integral-1d")]
    Integral1d {
        a: f64,
        verdict: String,
        result: Accessibility,
    },
    EngineValidation {
        study: StrongOrderStudy,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub header: ReportHeader,
    pub config: ScenarioConfig,
    pub payload: Payload,
    pub outputs: Vec<PathBuf>,
}

impl RunReport {
    /// True unless some bound check came out unsatisfied.
    pub fn all_satisfied(&self) -> bool {
        match &self.payload {
            Payload::BoundChecks { reports, .. } => reports.iter().all(BoundCheckReport::satisfied),
            _ => true,
        }
    }

    /// Canonical JSON of the numeric payload, the part that must reproduce exactly.
    pub fn payload_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.payload)?)
    }
}

pub fn run(config: &ScenarioConfig) -> Result<RunReport> {
    run_with(config, &RunOptions::default())
}

pub fn run_with(config: &ScenarioConfig, opts: &RunOptions) -> Result<RunReport> {
    config.validate()?;
    let started = Instant::now();
    let payload = match opts.workers {
        Some(n) => with_workers(n, || execute(config))?,
        None => execute(config)?,
    };
    let mut report = RunReport {
        header: ReportHeader {
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            wall_clock_seconds: started.elapsed().as_secs_f64(),
        },
        config: config.clone(),
        payload,
        outputs: Vec::new(),
    };
    if let Some(dir) = &opts.out_dir {
        report.outputs = write_outputs(&report, dir)?;
        if opts.debug_paths {
            report.outputs.extend(dump_debug_paths(config, dir)?);
        }
        write_json(&dir.join("report.json"), &report)?;
        report.outputs.push(dir.join("report.json"));
    }
    Ok(report)
}

fn reference_level(field: &CoefficientField, start: &[f64], a: Option<f64>, k: u32) -> Result<f64> {
    match a {
        Some(a) => Ok(a),
        None => Ok(field.level(start)? * 2f64.powi(k as i32)),
    }
}

fn execute(cfg: &ScenarioConfig) -> Result<Payload> {
    let field = cfg.build_field()?;
    let x = &cfg.start;
    let (n, seed, policy) = (cfg.n_paths, cfg.master_seed, &cfg.policy);
    Ok(match &cfg.experiment {
        Experiment::Hitting { eps_grid } => Payload::Hitting {
            horizon: cfg.horizon,
            eps_grid: eps_grid.clone(),
            estimates: estimate_lambda_hitting(&field, x, cfg.horizon, eps_grid, n, policy, seed)?,
        },
        Experiment::SqrtBound { a, k, t_grid } => {
            let a = reference_level(&field, x, *a, *k)?;
            let grid = t_grid.clone().unwrap_or_else(|| {
                default_t_grid(markov_constant(field.m(), field.lipschitz().map_or(0.0, |b| b.value)), DEFAULT_SQRT_GRID_BELOW)
            });
            let reports = check_sqrt_escape_bound(&field, x, a, *k, &grid, n, policy, seed)?;
            Payload::BoundChecks {
                fitted_exponent: fitted_escape_exponent(&reports),
                reports,
            }
        }
        Experiment::Displacement { a, k, t_grid } | Experiment::LevelChange { a, k, t_grid } => {
            let a = reference_level(&field, x, *a, *k)?;
            let grid = t_grid.clone().unwrap_or_else(|| DEFAULT_LOCAL_T_GRID.to_vec());
            let pairs = check_local_bounds(&field, x, a, *k, &grid, n, policy, seed)?;
            let displacement = matches!(cfg.experiment, Experiment::Displacement { .. });
            Payload::BoundChecks {
                reports: pairs
                    .into_iter()
                    .map(|p| if displacement { p.displacement } else { p.level_change })
                    .collect(),
                fitted_exponent: None,
            }
        }
        Experiment::Persistence { a, k, t0 } => {
            let a = reference_level(&field, x, *a, *k)?;
            let t0 = match t0 {
                Some(t) => *t,
                None => t0_threshold(markov_constant(field.m(), field.lipschitz_k()?)),
            };
            Payload::BoundChecks {
                reports: vec![check_halving_persistence(&field, std::slice::from_ref(x), a, *k, t0, n, policy, seed)?],
                fitted_exponent: None,
            }
        }
        Experiment::DyadicEscape { depth } => {
            let records = dyadic_escape_batch(&field, x, *depth, cfg.horizon, policy, n, seed)?;
            let summary = (0..*depth)
                .map(|k| {
                    let observed: Vec<f64> = records.iter().filter_map(|r| r.increments[k]).collect();
                    DyadicSummaryRow {
                        k,
                        mean_increment: (!observed.is_empty())
                            .then(|| observed.iter().sum::<f64>() / observed.len() as f64),
                        observed: observed.len(),
                        censored: records.len() - observed.len(),
                        ge_t0: records
                            .iter()
                            .filter(|r| r.increments[k].is_some_and(|v| v >= r.t0))
                            .count(),
                    }
                })
                .collect();
            Payload::DyadicEscape {
                a: field.level(x)?,
                t0: records.first().map_or(0.0, |r| r.t0),
                summary,
                records,
            }
        }
        Experiment::Integral1d { a } => {
            let result = accessibility_integral_1d(|y| field.sigma(&[y]).map_or(f64::NAN, |s| s.get(0, 0)), *a)?;
            Payload::Integral1d {
                a: *a,
                verdict: result.verdict().to_string(),
                result,
            }
        }
        Experiment::EngineValidation { exponents } => {
            let exps = exponents.clone().unwrap_or_else(|| DEFAULT_ENGINE_EXPONENTS.to_vec());
            Payload::EngineValidation {
                study: strong_order_study(x[0], cfg.horizon, &exps, n, seed)?,
            }
        }
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(io_err(path))
}

/// Writes the experiment's CSV tables into `dir` and returns their paths.
pub fn write_outputs(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let name = report.config.experiment.name();
    let path = dir.join(format!("table_{}.csv", name.replace('-', "_")));
    let mut w = csv::Writer::from_writer(create(&path)?);
    match &report.payload {
        Payload::Hitting { eps_grid, estimates, .. } => {
            w.write_record(["eps", "point", "ci_low", "ci_high", "n", "censored_n"])?;
            for (eps, e) in eps_grid.iter().zip(estimates) {
                w.write_record([
                    eps.to_string(),
                    e.point.to_string(),
                    e.ci_low.to_string(),
                    e.ci_high.to_string(),
                    e.n.to_string(),
                    e.censored_n.to_string(),
                ])?;
            }
        }
        Payload::BoundChecks { reports, .. } => {
            let time_key = if name == "persistence" { "t0" } else { "t" };
            w.write_record(["bound_name", time_key, "point", "ci_low", "ci_high", "n", "censored_n", "rhs", "satisfied", "slack", "vacuous"])?;
            for r in reports {
                w.write_record([
                    r.bound_name.clone(),
                    r.parameter(time_key).map_or(String::new(), |v| v.to_string()),
                    r.lhs.point.to_string(),
                    r.lhs.ci_low.to_string(),
                    r.lhs.ci_high.to_string(),
                    r.lhs.n.to_string(),
                    r.lhs.censored_n.to_string(),
                    r.rhs.to_string(),
                    r.satisfied().to_string(),
                    r.slack().to_string(),
                    r.vacuous.to_string(),
                ])?;
            }
        }
        Payload::DyadicEscape { records, .. } => {
            drop(w);
            write_dyadic_csv(records, create(&path)?)?;
            return Ok(vec![path]);
        }
        Payload::Integral1d { result, .. } => {
            w.write_record(["verdict", "value", "error", "partial_sum", "windows"])?;
            let row = match *result {
                Accessibility::Finite { value, error, windows } => {
                    ["finite".to_string(), value.to_string(), error.to_string(), String::new(), windows.to_string()]
                }
                Accessibility::Divergent { partial_sum, windows } => [
                    "divergent".to_string(),
                    String::new(),
                    String::new(),
                    partial_sum.to_string(),
                    windows.to_string(),
                ],
            };
            w.write_record(row)?;
        }
        Payload::EngineValidation { study } => {
            w.write_record(["h", "steps", "mean_abs_error", "ci_low", "ci_high", "n"])?;
            for r in &study.rows {
                w.write_record([
                    r.h.to_string(),
                    r.steps.to_string(),
                    r.error.point.to_string(),
                    r.error.ci_low.to_string(),
                    r.error.ci_high.to_string(),
                    r.error.n.to_string(),
                ])?;
            }
        }
    }
    w.flush().map_err(io_err(&path))?;
    Ok(vec![path])
}

/// Re-simulates one path of a scenario over its configured horizon.
///
/// Streams are keyed by `(master_seed, path_index)`, so the replay shares its
/// noise with the path of that index in any experiment run with the same seed.
pub fn replay(config: &ScenarioConfig, master_seed: u64, path_index: u64) -> Result<PathRealization> {
    let field = config.build_field()?;
    simulate_path(&field, &config.start, config.horizon, &config.policy, PathSeed::new(master_seed, path_index))
}

fn dump_debug_paths(config: &ScenarioConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    if matches!(config.experiment, Experiment::Integral1d { .. }) {
        return Ok(Vec::new());
    }
    let sub = dir.join("paths");
    fs::create_dir_all(&sub).map_err(io_err(&sub))?;
    let mut out = Vec::new();
    for i in 0..DEBUG_PATH_COUNT.min(config.n_paths as u64) {
        let path = replay(config, config.master_seed, i)?;
        let file = sub.join(format!("path_{i}.csv"));
        path.write_csv(create(&file)?)?;
        out.push(file);
    }
    Ok(out)
}
