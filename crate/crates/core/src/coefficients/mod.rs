//! Coefficient fields `(σ, b)` and the level function `‖σ(x)‖²_F + ‖b(x)‖²`
//! whose zero set is the set Λ where both coefficients vanish.

mod catalog;

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

pub use catalog::{catalog, FieldCatalogEntry, FieldSpec};

/// Safety factor applied to sampled Lipschitz quotients.
pub const DEFAULT_LIPSCHITZ_SAFETY: f64 = 1.25;

/// Default absolute tolerance for Λ-membership of a field not yet tied to a start point.
pub const DEFAULT_LAMBDA_TOL: f64 = 1e-12;

/// Dense row-major matrix, used for values of `σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("ragged matrix rows"));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::from_row_major(rows.len(), cols, data)
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn scaled(&self, c: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }
}

/// `√(Tr(MᵀM))`, the square root of the sum of squared entries.
pub fn frobenius_norm(m: &Matrix) -> Result<f64> {
    if m.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix has a non-finite entry"));
    }
    Ok(sum_squares(&m.data).sqrt())
}

pub(crate) fn sum_squares(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

pub(crate) fn euclidean_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

type SigmaFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
type DriftFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Where a field's Lipschitz bound `K` came from. Reports echo this.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LipschitzSource {
    /// Analytic global constant.
    Declared,
    /// Analytic constant valid only on a radial band `lo ≤ ‖x‖ ≤ hi`; the
    /// field is not globally Lipschitz.
    Regional { lo: f64, hi: f64 },
    /// Sampled with [`estimate_lipschitz`].
    Estimated { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzBound {
    pub value: f64,
    pub source: LipschitzSource,
}

/// A coefficient pair `(σ, b)` with `σ: Rᵈ → R^{d×m}` and `b: Rᵈ → Rᵈ`.
///
/// Both maps are stored as pure closures writing into caller buffers:
/// `sigma` fills a row-major `d × m` slice, `drift` a length-`d` slice.
/// Evaluation holds no mutable state, so one field can be shared by every
/// Monte Carlo worker.
#[derive(Clone)]
pub struct CoefficientField {
    name: String,
    d: usize,
    m: usize,
    sigma: Arc<SigmaFn>,
    drift: Arc<DriftFn>,
    lipschitz: Option<LipschitzBound>,
    lambda_tol: f64,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("name", &self.name)
            .field("d", &self.d)
            .field("m", &self.m)
            .field("lipschitz", &self.lipschitz)
            .field("lambda_tol", &self.lambda_tol)
            .finish_non_exhaustive()
    }
}

impl CoefficientField {
    pub fn new<S, B>(name: impl Into<String>, d: usize, m: usize, sigma: S, drift: B) -> Result<Self>
    where
        S: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        B: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        if d == 0 || m == 0 {
            return Err(Error::invalid("field dimensions d and m must be positive"));
        }
        Ok(CoefficientField {
            name: name.into(),
            d,
            m,
            sigma: Arc::new(sigma),
            drift: Arc::new(drift),
            lipschitz: None,
            lambda_tol: DEFAULT_LAMBDA_TOL,
        })
    }

    /// Convenience constructor for scalar fields (`d = m = 1`).
    pub fn scalar<S, B>(name: impl Into<String>, sigma: S, drift: B) -> Result<Self>
    where
        S: Fn(f64) -> f64 + Send + Sync + 'static,
        B: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(
            name,
            1,
            1,
            move |x, out| out[0] = sigma(x[0]),
            move |x, out| out[0] = drift(x[0]),
        )
    }

    pub fn with_declared_lipschitz(mut self, k: f64) -> Result<Self> {
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::invalid(format!("Lipschitz bound must be finite and >= 0, got {k}")));
        }
        self.lipschitz = Some(LipschitzBound {
            value: k,
            source: LipschitzSource::Declared,
        });
        Ok(self)
    }

    pub fn with_lipschitz(mut self, bound: LipschitzBound) -> Self {
        self.lipschitz = Some(bound);
        self
    }

    /// Samples `K` over `region` and stores it as an estimated bound.
    pub fn with_estimated_lipschitz(self, region: &BoxRegion, samples: usize, seed: u64) -> Result<Self> {
        let value = estimate_lipschitz(&self, region, samples, seed)?;
        Ok(self.with_lipschitz(LipschitzBound {
            value,
            source: LipschitzSource::Estimated { samples, seed },
        }))
    }

    pub fn with_lambda_tol(mut self, tol: f64) -> Result<Self> {
        if !(tol >= 0.0 && tol.is_finite()) {
            return Err(Error::invalid(format!("lambda_tol must be finite and >= 0, got {tol}")));
        }
        self.lambda_tol = tol;
        Ok(self)
    }

    /// Sets `lambda_tol = 1e-12 · max(1, level(start))`.
    pub fn with_lambda_tol_for_start(self, start: &[f64]) -> Result<Self> {
        let l = self.level(start)?;
        self.with_lambda_tol(DEFAULT_LAMBDA_TOL * l.max(1.0))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn lambda_tol(&self) -> f64 {
        self.lambda_tol
    }

    pub fn lipschitz(&self) -> Option<&LipschitzBound> {
        self.lipschitz.as_ref()
    }

    /// The Lipschitz bound `K`, or an error when none has been declared or estimated.
    pub fn lipschitz_k(&self) -> Result<f64> {
        self.lipschitz
            .as_ref()
            .map(|b| b.value)
            .ok_or_else(|| Error::invalid(format!("field `{}` has no Lipschitz bound", self.name)))
    }

    pub(crate) fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::invalid(format!(
                "point has dimension {}, field `{}` has d = {}",
                x.len(),
                self.name,
                self.d
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("point has a non-finite component"));
        }
        Ok(())
    }

    pub fn sigma(&self, x: &[f64]) -> Result<Matrix> {
        self.check_point(x)?;
        let mut out = Matrix::zeros(self.d, self.m);
        (self.sigma)(x, &mut out.data);
        Ok(out)
    }

    pub fn drift(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let mut out = vec![0.0; self.d];
        (self.drift)(x, &mut out);
        Ok(out)
    }

    /// `‖σ(x)‖²_F + ‖b(x)‖²`.
    pub fn level(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.evaluator().level(x))
    }

    /// Numerical Λ-membership: `level(x) ≤ lambda_tol`.
    pub fn in_lambda(&self, x: &[f64]) -> Result<bool> {
        Ok(self.level(x)? <= self.lambda_tol)
    }

    /// Scratch buffers for allocation-free evaluation in hot loops.
    pub fn evaluator(&self) -> Evaluator<'_> {
        Evaluator {
            field: self,
            sigma: vec![0.0; self.d * self.m],
            drift: vec![0.0; self.d],
        }
    }
}

/// Reusable evaluation workspace. Inputs are not dimension-checked.
pub struct Evaluator<'a> {
    field: &'a CoefficientField,
    pub(crate) sigma: Vec<f64>,
    pub(crate) drift: Vec<f64>,
}

impl Evaluator<'_> {
    /// Evaluates both coefficients at `x` and returns the level.
    pub fn eval(&mut self, x: &[f64]) -> f64 {
        (self.field.sigma)(x, &mut self.sigma);
        (self.field.drift)(x, &mut self.drift);
        sum_squares(&self.sigma) + sum_squares(&self.drift)
    }

    pub fn level(&mut self, x: &[f64]) -> f64 {
        self.eval(x)
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn drift(&self) -> &[f64] {
        &self.drift
    }
}

/// Axis-aligned box `[lo₁, hi₁] × … × [lo_d, hi_d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::invalid("box bounds must be nonempty and of equal dimension"));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(h > l) || !l.is_finite() || !h.is_finite()) {
            return Err(Error::invalid("box region has zero volume"));
        }
        Ok(BoxRegion { lo, hi })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo], vec![hi])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }
}

/// Sampled Lipschitz bound with the default safety factor of 1.25.
pub fn estimate_lipschitz(field: &CoefficientField, region: &BoxRegion, samples: usize, seed: u64) -> Result<f64> {
    estimate_lipschitz_with_safety(field, region, samples, seed, DEFAULT_LIPSCHITZ_SAFETY)
}

/// Max over all pairs of sampled points of
/// `max(‖σ(x) − σ(y)‖_F, ‖b(x) − b(y)‖) / ‖x − y‖`, times `safety`.
///
/// The sample set is the box corners (for `d ≤ 10`) plus `samples` uniform
/// points, and every pair is compared, so cost is quadratic in `samples`.
pub fn estimate_lipschitz_with_safety(
    field: &CoefficientField,
    region: &BoxRegion,
    samples: usize,
    seed: u64,
    safety: f64,
) -> Result<f64> {
    if samples < 2 {
        return Err(Error::invalid("estimate_lipschitz needs at least 2 samples"));
    }
    if region.dim() != field.d() {
        return Err(Error::invalid(format!(
            "region has dimension {}, field has d = {}",
            region.dim(),
            field.d()
        )));
    }
    if region.lo.iter().zip(&region.hi).any(|(l, h)| !(h > l)) {
        return Err(Error::invalid("box region has zero volume"));
    }
    let d = field.d();
    let mut points: Vec<Vec<f64>> = Vec::new();
    if d <= 10 {
        for mask in 0..(1usize << d) {
            points.push(
                (0..d)
                    .map(|i| if mask >> i & 1 == 1 { region.hi[i] } else { region.lo[i] })
                    .collect(),
            );
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        points.push((0..d).map(|i| rng.random_range(region.lo[i]..region.hi[i])).collect());
    }

    let mut ev = field.evaluator();
    let values: Vec<(Vec<f64>, Vec<f64>)> = points
        .iter()
        .map(|p| {
            ev.eval(p);
            (ev.sigma.clone(), ev.drift.clone())
        })
        .collect();

    let mut best = 0.0f64;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let dist = euclidean_distance(&points[i], &points[j]);
            if dist == 0.0 {
                continue;
            }
            let ds = euclidean_distance(&values[i].0, &values[j].0);
            let db = euclidean_distance(&values[i].1, &values[j].1);
            let q = ds.max(db) / dist;
            if q.is_finite() {
                best = best.max(q);
            }
        }
    }
    Ok(best * safety)
}
