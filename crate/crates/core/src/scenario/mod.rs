//! Declarative experiment descriptions and the runner behind the `zeroset` CLI.
//!
//! A scenario is a JSON document:
//!
//! ```json
//! {
//!   "schema": "zeroset.scenario/v1",
//!   "field": { "name": "linear-1d" },
//!   "start": [1.0],
//!   "horizon": 1.0,
//!   "n_paths": 2000,
//!   "master_seed": 7,
//!   "experiment": { "kind": "hitting", "eps_grid": [1e-2, 1e-4, 1e-6] }
//! }
//! ```
//!
//! `policy` defaults to level-adaptive with `h_max = 1e-3`, and `min_paths`
//! to 100. Unknown keys are rejected.

mod run;

use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientField, FieldSpec};
use crate::error::{Error, Result};
use crate::sde_engine::StepPolicy;

pub use run::{replay, run, run_with, write_outputs, DyadicSummaryRow, Payload, ReportHeader, RunOptions, RunReport};

pub const SCHEMA: &str = "zeroset.scenario/v1";

/// Floor on `n_paths` for experiments that report confidence intervals.
pub const DEFAULT_MIN_PATHS: usize = 100;

pub const DEFAULT_LOCAL_T_GRID: [f64; 3] = [0.01, 0.1, 1.0];

/// Default number of halvings below `t₀` in the sqrt-bound grid.
pub const DEFAULT_SQRT_GRID_BELOW: u32 = 6;

pub const DEFAULT_ENGINE_EXPONENTS: [u32; 7] = [4, 5, 6, 7, 8, 9, 10];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    Hitting {
        eps_grid: Vec<f64>,
    },
    SqrtBound {
        #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
        a: Option<f64>,
        k: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t_grid: Option<Vec<f64>>,
    },
    Displacement {
        #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
        a: Option<f64>,
        k: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t_grid: Option<Vec<f64>>,
    },
    LevelChange {
        #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
        a: Option<f64>,
        k: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t_grid: Option<Vec<f64>>,
    },
    Persistence {
        #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
        a: Option<f64>,
        k: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t0: Option<f64>,
    },
    DyadicEscape {
        depth: usize,
    },
    /// Integral test on `(0, a]` for the field's scalar `σ`.
    #[serde(rename = "integral-1d")]
    Integral1d {
        a: f64,
    },
    EngineValidation {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        exponents: Option<Vec<u32>>,
    },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Hitting { .. } => "hitting",
            Experiment::SqrtBound { .. } => "sqrt-bound",
            Experiment::Displacement { .. } => "displacement",
            Experiment::LevelChange { .. } => "level-change",
            Experiment::Persistence { .. } => "persistence",
            Experiment::DyadicEscape { .. } => "dyadic-escape",
            Experiment::Integral1d { .. } => "integral-1d",
            Experiment::EngineValidation { .. } => "engine-validation",
        }
    }

    fn produces_ci(&self) -> bool {
        !matches!(self, Experiment::Integral1d { .. })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    schema: String,
    field: FieldSpec,
    start: Vec<f64>,
    horizon: f64,
    #[serde(default)]
    policy: Option<StepPolicy>,
    n_paths: usize,
    master_seed: u64,
    #[serde(default)]
    min_paths: Option<usize>,
    experiment: Experiment,
}

/// A validated scenario with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub schema: String,
    pub field: FieldSpec,
    pub start: Vec<f64>,
    pub horizon: f64,
    pub policy: StepPolicy,
    pub n_paths: usize,
    pub master_seed: u64,
    pub min_paths: usize,
    pub experiment: Experiment,
    /// Keys that were absent and took their default value.
    pub defaults_applied: Vec<String>,
}

fn config_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawScenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        config_err(if path.is_empty() { "." } else { &path }, e.into_inner().to_string())
    })?;

    let mut defaults_applied = Vec::new();
    let policy = raw.policy.unwrap_or_else(|| {
        defaults_applied.push("policy".into());
        StepPolicy::default()
    });
    let min_paths = raw.min_paths.unwrap_or_else(|| {
        defaults_applied.push("min_paths".into());
        DEFAULT_MIN_PATHS
    });
    let cfg = ScenarioConfig {
        schema: raw.schema,
        field: raw.field,
        start: raw.start,
        horizon: raw.horizon,
        policy,
        n_paths: raw.n_paths,
        master_seed: raw.master_seed,
        min_paths,
        experiment: raw.experiment,
        defaults_applied,
    };
    cfg.validate()?;
    Ok(cfg)
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            return Err(config_err("schema", format!("unsupported schema `{}`, expected `{SCHEMA}`", self.schema)));
        }
        let field = self.field.build().map_err(|e| config_err("field", e.to_string()))?;
        if self.start.len() != field.d() {
            return Err(config_err(
                "start",
                format!("dimension mismatch: start has {} components, field `{}` has d = {}", self.start.len(), self.field.name(), field.d()),
            ));
        }
        if self.start.iter().any(|v| !v.is_finite()) {
            return Err(config_err("start", "non-finite component"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(config_err("horizon", "must be positive and finite"));
        }
        self.policy.validate().map_err(|e| config_err("policy", e.to_string()))?;
        if self.n_paths == 0 || (self.experiment.produces_ci() && self.n_paths < self.min_paths) {
            return Err(config_err(
                "n_paths",
                format!("{} paths is below the floor of {} for `{}`", self.n_paths, self.min_paths, self.experiment.name()),
            ));
        }
        let start_level = field.level(&self.start)?;
        let in_lambda = start_level <= crate::coefficients::DEFAULT_LAMBDA_TOL * start_level.max(1.0);
        let positive = |v: f64| v > 0.0 && v.is_finite();
        let check_grid = |grid: &Option<Vec<f64>>| -> Result<()> {
            if let Some(g) = grid {
                if g.is_empty() || g.iter().any(|&t| !(positive(t) && t <= 1.0)) {
                    return Err(config_err("experiment.t_grid", "must be nonempty with entries in (0, 1]"));
                }
            }
            Ok(())
        };
        match &self.experiment {
            Experiment::Hitting { eps_grid } => {
                if eps_grid.is_empty() || eps_grid.iter().any(|&e| !positive(e)) || eps_grid.windows(2).any(|w| w[1] >= w[0]) {
                    return Err(config_err("experiment.eps_grid", "must be nonempty, positive and strictly decreasing"));
                }
                if in_lambda {
                    return Err(config_err("start", "start lies in Lambda"));
                }
            }
            Experiment::SqrtBound { a, k, t_grid }
            | Experiment::Displacement { a, k, t_grid }
            | Experiment::LevelChange { a, k, t_grid } => {
                if *k == 0 {
                    return Err(config_err("experiment.k", "must be >= 1"));
                }
                if a.is_some_and(|v| !positive(v)) {
                    return Err(config_err("experiment.A", "must be positive"));
                }
                check_grid(t_grid)?;
                if in_lambda {
                    return Err(config_err("start", "start lies in Lambda"));
                }
            }
            Experiment::Persistence { a, t0, .. } => {
                if a.is_some_and(|v| !positive(v)) {
                    return Err(config_err("experiment.A", "must be positive"));
                }
                if t0.is_some_and(|v| !(v > 0.0 && v < 1.0)) {
                    return Err(config_err("experiment.t0", "must lie in (0, 1)"));
                }
            }
            Experiment::DyadicEscape { depth } => {
                if *depth == 0 {
                    return Err(config_err("experiment.depth", "must be >= 1"));
                }
                if in_lambda {
                    return Err(config_err("start", "start lies in Lambda"));
                }
            }
            Experiment::Integral1d { a } => {
                if !positive(*a) {
                    return Err(config_err("experiment.a", "must be positive"));
                }
                if field.d() != 1 || field.m() != 1 {
                    return Err(config_err("field", "integral-1d needs a scalar field"));
                }
            }
            Experiment::EngineValidation { exponents } => {
                if !matches!(self.field, FieldSpec::Linear1d {}) {
                    return Err(config_err("field.name", "engine-validation uses the closed form of `linear-1d`"));
                }
                if let Some(e) = exponents {
                    if e.len() < 2 || e.iter().any(|&v| v > 20) {
                        return Err(config_err("experiment.exponents", "need at least two exponents, each <= 20"));
                    }
                }
            }
        }
        Ok(())
    }

    /// The configured field with `lambda_tol` scaled to the start level.
    pub fn build_field(&self) -> Result<CoefficientField> {
        self.field.build()?.with_lambda_tol_for_start(&self.start)
    }
}
