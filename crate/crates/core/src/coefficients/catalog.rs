use serde::{Deserialize, Serialize};

use super::{CoefficientField, LipschitzBound, LipschitzSource, Matrix};
use crate::error::{Error, Result};

/// Radial band on which the power-law field's regional Lipschitz constant is computed.
pub const POWER_LAW_DEFAULT_REGION: [f64; 2] = [0.5, 2.0];

/// Built-in field selected by name plus numeric parameters.
///
/// This is the form fields take in scenario configs; custom fields are
/// constructed in code with [`CoefficientField::new`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldSpec {
    /// `σ(x) = x`, `b = 0`: geometric Brownian motion.
    #[serde(rename = "linear-1d")]
    Linear1d {},
    /// `σ(y) = |y|^α`, `b = 0`.
    PowerLaw {
        alpha: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k_region: Option<[f64; 2]>,
    },
    /// `σ(x) = diag(x)`, `b(x) = −x`, with `m = d`.
    DiagonalLinear { d: usize },
    /// `σ ≡ Σ₀`, `b ≡ b₀`.
    Constant { sigma: Vec<Vec<f64>>, drift: Vec<f64> },
    /// `σ ≡ 0`, `b(x) = −rate·x`: deterministic exponential decay.
    LinearDecay {
        rate: f64,
        #[serde(default = "one")]
        d: usize,
    },
}

fn one() -> usize {
    1
}

impl FieldSpec {
    pub fn name(&self) -> &'static str {
        match self {
            FieldSpec::Linear1d {} => "linear-1d",
            FieldSpec::PowerLaw { .. } => "power-law",
            FieldSpec::DiagonalLinear { .. } => "diagonal-linear",
            FieldSpec::Constant { .. } => "constant",
            FieldSpec::LinearDecay { .. } => "linear-decay",
        }
    }

    /// Every valid field name, in catalog order.
    pub fn names() -> &'static [&'static str] {
        &["linear-1d", "power-law", "diagonal-linear", "constant", "linear-decay"]
    }

    pub fn build(&self) -> Result<CoefficientField> {
        match self {
            FieldSpec::Linear1d {} => CoefficientField::scalar("linear-1d", |x| x, |_| 0.0)?.with_declared_lipschitz(1.0),
            FieldSpec::PowerLaw { alpha, k_region } => power_law(*alpha, k_region.unwrap_or(POWER_LAW_DEFAULT_REGION)),
            FieldSpec::DiagonalLinear { d } => {
                let d = *d;
                CoefficientField::new(
                    "diagonal-linear",
                    d,
                    d,
                    move |x, out| {
                        out.fill(0.0);
                        for i in 0..d {
                            out[i * d + i] = x[i];
                        }
                    },
                    |x, out| {
                        for (o, v) in out.iter_mut().zip(x) {
                            *o = -v;
                        }
                    },
                )?
                .with_declared_lipschitz(1.0)
            }
            FieldSpec::Constant { sigma, drift } => {
                let s = Matrix::from_rows(sigma)?;
                if s.rows() == 0 || s.cols() == 0 {
                    return Err(Error::invalid("constant field needs a nonempty sigma matrix"));
                }
                if drift.len() != s.rows() {
                    return Err(Error::invalid(format!(
                        "constant field drift has length {}, sigma has {} rows",
                        drift.len(),
                        s.rows()
                    )));
                }
                let b = drift.clone();
                let data = s.as_slice().to_vec();
                CoefficientField::new(
                    "constant",
                    s.rows(),
                    s.cols(),
                    move |_, out| out.copy_from_slice(&data),
                    move |_, out| out.copy_from_slice(&b),
                )?
                .with_declared_lipschitz(0.0)
            }
            FieldSpec::LinearDecay { rate, d } => {
                let rate = *rate;
                if !(rate >= 0.0 && rate.is_finite()) {
                    return Err(Error::invalid(format!("linear-decay rate must be finite and >= 0, got {rate}")));
                }
                CoefficientField::new(
                    "linear-decay",
                    *d,
                    1,
                    |_, out| out.fill(0.0),
                    move |x, out| {
                        for (o, v) in out.iter_mut().zip(x) {
                            *o = -rate * v;
                        }
                    },
                )?
                .with_declared_lipschitz(rate)
            }
        }
    }
}

fn power_law(alpha: f64, region: [f64; 2]) -> Result<CoefficientField> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("power-law alpha must be > 0, got {alpha}")));
    }
    let [lo, hi] = region;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::invalid(format!("power-law k_region must satisfy 0 < lo < hi, got [{lo}, {hi}]")));
    }
    let field = CoefficientField::scalar(format!("power-law(alpha={alpha})"), move |y| y.abs().powf(alpha), |_| 0.0)?;
    if alpha == 1.0 {
        return field.with_declared_lipschitz(1.0);
    }
    // sup of α|y|^{α−1} over lo ≤ |y| ≤ hi
    let value = if alpha < 1.0 {
        alpha * lo.powf(alpha - 1.0)
    } else {
        alpha * hi.powf(alpha - 1.0)
    };
    Ok(field.with_lipschitz(LipschitzBound {
        value,
        source: LipschitzSource::Regional { lo, hi },
    }))
}

/// One built-in field with default parameters and a note on its known closed forms.
#[derive(Debug, Clone)]
pub struct FieldCatalogEntry {
    pub name: &'static str,
    pub spec: FieldSpec,
    pub field: CoefficientField,
    pub analytic_notes: &'static str,
}

pub fn catalog() -> Vec<FieldCatalogEntry> {
    let specs = [
        (
            FieldSpec::Linear1d {},
            "sigma(x) = x, b = 0 (d = m = 1). Geometric Brownian motion X_t = x exp(B_t - t/2). \
             K = 1. Lambda = {0}; inaccessible.",
        ),
        (
            FieldSpec::PowerLaw { alpha: 0.5, k_region: None },
            "sigma(y) = |y|^alpha, b = 0 (d = m = 1), parameter alpha > 0. Lambda = {0}. \
             Integral of y^(1-2 alpha) on (0, a] is finite iff alpha < 1, so 0 is accessible iff alpha < 1. \
             Not globally Lipschitz for alpha != 1; K is the sup of the derivative on |y| in k_region \
             (default [0.5, 2]). alpha = 1/2 is a squared Bessel process of dimension 0 (after scaling by 4), \
             hitting 0 by time t with probability exp(-2x/t).",
        ),
        (
            FieldSpec::DiagonalLinear { d: 2 },
            "sigma(x) = diag(x), b(x) = -x, m = d (parameter d). Components are independent: \
             X_i(t) = x_i exp(B_i(t) - 3t/2). level = 2|x|^2. K = 1. Lambda = {0}.",
        ),
        (
            FieldSpec::Constant {
                sigma: vec![vec![1.0]],
                drift: vec![0.0],
            },
            "sigma = Sigma0, b = b0 (parameters sigma as rows, drift). Level is constant; \
             Lambda is empty unless both vanish, in which case it is everything. K = 0.",
        ),
        (
            FieldSpec::LinearDecay { rate: 1.0, d: 1 },
            "sigma = 0, b(x) = -rate x (parameters rate, d). Deterministic: X_t = x exp(-rate t), \
             level halves every ln(2)/(2 rate). K = rate.",
        ),
    ];
    specs
        .into_iter()
        .map(|(spec, notes)| FieldCatalogEntry {
            name: spec.name(),
            field: spec.build().expect("catalog defaults are valid"),
            spec,
            analytic_notes: notes,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::euclidean_distance;
    use proptest::prelude::*;

    #[test]
    fn catalog_has_required_families() {
        let names: Vec<_> = catalog().iter().map(|e| e.name).collect();
        for required in ["linear-1d", "power-law", "diagonal-linear", "constant"] {
            assert!(names.contains(&required));
        }
        assert_eq!(names, FieldSpec::names());
    }

    #[test]
    fn sigma_shape_matches_dimensions() {
        for entry in catalog() {
            let f = &entry.field;
            let x = vec![0.7; f.d()];
            let s = f.sigma(&x).unwrap();
            assert_eq!((s.rows(), s.cols()), (f.d(), f.m()), "{}", entry.name);
        }
    }

    #[test]
    fn power_law_extends_by_zero() {
        let f = FieldSpec::PowerLaw { alpha: 0.5, k_region: None }.build().unwrap();
        assert_eq!(f.level(&[0.0]).unwrap(), 0.0);
        assert!((f.level(&[-4.0]).unwrap() - 4.0).abs() < 1e-15);
        assert!(matches!(f.lipschitz().unwrap().source, LipschitzSource::Regional { .. }));
    }

    #[test]
    fn spec_json_round_trip() {
        let s: FieldSpec = serde_json::from_str(r#"{"name":"power-law","alpha":1.5}"#).unwrap();
        assert_eq!(s, FieldSpec::PowerLaw { alpha: 1.5, k_region: None });
        let back: FieldSpec = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<FieldSpec>(r#"{"name":"linear-1d","alpha":1}"#).is_err());
    }

    fn global_fields() -> Vec<CoefficientField> {
        vec![
            FieldSpec::Linear1d {}.build().unwrap(),
            FieldSpec::DiagonalLinear { d: 3 }.build().unwrap(),
            FieldSpec::LinearDecay { rate: 2.0, d: 2 }.build().unwrap(),
            FieldSpec::Constant {
                sigma: vec![vec![1.0, 2.0], vec![0.0, -1.0]],
                drift: vec![0.5, 0.25],
            }
            .build()
            .unwrap(),
        ]
    }

    fn point(d: usize, raw: &[f64]) -> Vec<f64> {
        raw.iter().cycle().take(d).copied().collect()
    }

    proptest! {
        #[test]
        fn declared_lipschitz_holds(raw_x in prop::collection::vec(-5.0f64..5.0, 3), raw_y in prop::collection::vec(-5.0f64..5.0, 3)) {
            for f in global_fields() {
                let x = point(f.d(), &raw_x);
                let y = point(f.d(), &raw_y);
                let k = f.lipschitz_k().unwrap();
                let dist = euclidean_distance(&x, &y);
                let ds = euclidean_distance(f.sigma(&x).unwrap().as_slice(), f.sigma(&y).unwrap().as_slice());
                let db = euclidean_distance(&f.drift(&x).unwrap(), &f.drift(&y).unwrap());
                prop_assert!(ds <= k * dist * (1.0 + 1e-12) + 1e-12);
                prop_assert!(db <= k * dist * (1.0 + 1e-12) + 1e-12);
            }
        }

        #[test]
        fn level_change_is_lipschitz_on_sublevel_sets(raw_x in prop::collection::vec(-3.0f64..3.0, 3), raw_y in prop::collection::vec(-3.0f64..3.0, 3)) {
            for f in global_fields() {
                let x = point(f.d(), &raw_x);
                let y = point(f.d(), &raw_y);
                let (lx, ly) = (f.level(&x).unwrap(), f.level(&y).unwrap());
                // smallest L with level(x) ≤ L and level(y) ≤ 2L
                let l = lx.max(ly / 2.0);
                let k = f.lipschitz_k().unwrap();
                let bound = 2.0 * (3.0 * l).sqrt() * k * euclidean_distance(&x, &y);
                prop_assert!((lx - ly).abs() <= bound * (1.0 + 1e-10) + 1e-12, "{} vs {}", (lx - ly).abs(), bound);
            }
        }

        #[test]
        fn level_is_nonnegative_and_continuous(raw in prop::collection::vec(-4.0f64..4.0, 3), eps in -1e-7f64..1e-7) {
            for f in global_fields() {
                let x = point(f.d(), &raw);
                let y: Vec<f64> = x.iter().map(|v| v + eps).collect();
                let (lx, ly) = (f.level(&x).unwrap(), f.level(&y).unwrap());
                prop_assert!(lx >= 0.0);
                prop_assert!((lx - ly).abs() <= 1e-4);
            }
        }

        #[test]
        fn frobenius_is_absolutely_homogeneous(entries in prop::collection::vec(-10.0f64..10.0, 6), c in -5.0f64..5.0) {
            let m = Matrix::from_row_major(2, 3, entries).unwrap();
            let lhs = super::super::frobenius_norm(&m.scaled(c)).unwrap();
            let rhs = c.abs() * super::super::frobenius_norm(&m).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
        }
    }
}
