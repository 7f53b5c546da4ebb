//! Potentials `F(t, x)` driving `Δu = ∇F(t, u)`, plus the built-in catalog.
//!
//! Time dependence of catalog potentials is carried by [`TrigSeries`], a
//! finite trigonometric series in `t`, so every catalog potential is exactly
//! multi-periodic on the box.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, TorusGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convexity {
    Convex,
    StrictlyConvex,
    NonConvexUnchecked,
}

/// A potential `F: T₀ × Rⁿ → R` that is C¹ in `x`.
pub trait Potential: Send + Sync {
    fn n(&self) -> usize;

    fn value(&self, t: &[f64], x: &[f64]) -> f64;

    fn gradient(&self, t: &[f64], x: &[f64], out: &mut [f64]);

    /// Writes the row-major `n × n` Hessian in `x`. Returns `false` when the
    /// potential has no Hessian, in which case `out` is left untouched.
    fn hessian(&self, _t: &[f64], _x: &[f64], _out: &mut [f64]) -> bool {
        false
    }

    fn has_hessian(&self) -> bool {
        false
    }

    fn convexity(&self) -> Convexity;

    /// Free-form note on the analytic growth envelope `|F|, |∇F| ≤ a(|x|) b(t)`.
    fn metadata(&self) -> &str {
        ""
    }
}

/// One term `cos·cos θ + sin·sin θ` with phase `θ = Σ_α 2π k_α t^α / T^α`.
/// Empty `cos` or `sin` vectors stand for zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub freq: Vec<i64>,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

/// A vector-valued trigonometric polynomial `t ↦ Rⁿ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigSeries {
    pub n: usize,
    #[serde(default)]
    pub terms: Vec<TrigTerm>,
}

impl TrigSeries {
    pub fn zero(n: usize) -> Self {
        Self {
            n,
            terms: Vec::new(),
        }
    }

    pub fn constant(c: &[f64]) -> Self {
        Self {
            n: c.len(),
            terms: Vec::new(),
        }
        .with_term(TrigTerm {
            freq: Vec::new(),
            cos: c.to_vec(),
            sin: Vec::new(),
        })
    }

    /// Adds a term; a `freq` shorter than `p` is padded with zeros at
    /// validation time.
    pub fn with_term(mut self, term: TrigTerm) -> Self {
        self.terms.push(term);
        self
    }

    pub fn cos(self, freq: &[i64], coeffs: &[f64]) -> Self {
        self.with_term(TrigTerm {
            freq: freq.to_vec(),
            cos: coeffs.to_vec(),
            sin: Vec::new(),
        })
    }

    pub fn sin(self, freq: &[i64], coeffs: &[f64]) -> Self {
        self.with_term(TrigTerm {
            freq: freq.to_vec(),
            cos: Vec::new(),
            sin: coeffs.to_vec(),
        })
    }

    fn validate(&self, p: usize) -> Result<()> {
        if self.n == 0 {
            return Err(Error::ComponentMismatch {
                expected: 1,
                got: 0,
            });
        }
        for term in &self.terms {
            if term.freq.len() > p {
                return Err(Error::LengthMismatch {
                    what: "trigonometric frequency",
                    expected: p,
                    got: term.freq.len(),
                });
            }
            for coeffs in [&term.cos, &term.sin] {
                if !coeffs.is_empty() && coeffs.len() != self.n {
                    return Err(Error::LengthMismatch {
                        what: "trigonometric coefficients",
                        expected: self.n,
                        got: coeffs.len(),
                    });
                }
                if coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(Error::NonFinite("trigonometric coefficient".into()));
                }
            }
        }
        Ok(())
    }

    /// Rejects terms at or beyond the Nyquist frequency of `grid`.
    pub fn check_resolvable(&self, grid: &TorusGrid) -> Result<()> {
        self.validate(grid.p())?;
        for term in &self.terms {
            let beyond = term
                .freq
                .iter()
                .zip(grid.resolutions())
                .any(|(&k, &n)| 2 * k.unsigned_abs() as usize >= n);
            if beyond {
                return Err(Error::BeyondNyquist {
                    freq: term.freq.clone(),
                    resolutions: grid.resolutions().to_vec(),
                });
            }
        }
        Ok(())
    }

    pub fn bind(&self, periods: &[f64]) -> Result<PeriodicPath> {
        self.validate(periods.len())?;
        Ok(PeriodicPath {
            series: self.clone(),
            periods: periods.to_vec(),
        })
    }
}

/// A [`TrigSeries`] bound to concrete periods so it can be evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicPath {
    series: TrigSeries,
    periods: Vec<f64>,
}

impl PeriodicPath {
    pub fn n(&self) -> usize {
        self.series.n
    }

    pub fn series(&self) -> &TrigSeries {
        &self.series
    }

    fn wavenumbers<'a>(&'a self, term: &'a TrigTerm) -> impl Iterator<Item = f64> + 'a {
        term.freq
            .iter()
            .zip(&self.periods)
            .map(|(&k, &t)| 2.0 * PI * k as f64 / t)
    }

    /// `out = c(t)`.
    pub fn eval(&self, t: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for term in &self.series.terms {
            let theta: f64 = self
                .wavenumbers(term)
                .zip(t)
                .map(|(kappa, &ti)| kappa * ti)
                .sum();
            let (s, c) = theta.sin_cos();
            for (o, a) in out.iter_mut().zip(&term.cos) {
                *o += a * c;
            }
            for (o, b) in out.iter_mut().zip(&term.sin) {
                *o += b * s;
            }
        }
    }

    pub fn eval_vec(&self, t: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        self.eval(t, &mut out);
        out
    }

    /// The series mapped termwise by `term ↦ scale(|κ|²) · term`.
    pub fn map_spectrum(&self, scale: impl Fn(f64) -> f64) -> PeriodicPath {
        let mut series = self.series.clone();
        for term in &mut series.terms {
            let k2: f64 = self.wavenumbers(term).map(|k| k * k).sum();
            let s = scale(k2);
            term.cos.iter_mut().for_each(|c| *c *= s);
            term.sin.iter_mut().for_each(|c| *c *= s);
        }
        PeriodicPath {
            series,
            periods: self.periods.clone(),
        }
    }

    /// Analytic Laplacian in `t`.
    pub fn laplacian(&self) -> PeriodicPath {
        self.map_spectrum(|k2| -k2)
    }

    /// Sup-norm bound `Σ |coefficients|` over all terms.
    pub fn sup_bound(&self) -> f64 {
        self.series
            .terms
            .iter()
            .map(|term| {
                let c: f64 = term.cos.iter().map(|v| v * v).sum::<f64>().sqrt();
                let s: f64 = term.sin.iter().map(|v| v * v).sum::<f64>().sqrt();
                c + s
            })
            .sum()
    }

    pub fn sample(&self, grid: &Arc<TorusGrid>) -> Field {
        Field::from_fn(grid, self.n(), |t, out| self.eval(t, out))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    /// `½|x − c(t)|²`
    QuadraticShift { c: PeriodicPath },
    /// `½⟨Ax, x⟩ + ⟨g(t), x⟩`
    QuadraticForm { a: Vec<f64>, g: PeriodicPath },
    /// `⟨a(t), x⟩`
    LinearDrift { a: PeriodicPath },
    /// `Σ_i log(e^{y_i} + e^{−y_i}) + ⟨tilt, x⟩` with `y = x − c(t)`
    LogSumExp { c: PeriodicPath, tilt: Vec<f64> },
}

/// A potential from the built-in catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogPotential {
    kind: Kind,
    n: usize,
    convexity: Convexity,
    metadata: String,
}

/// Quadratic potential data `F = ½⟨Ax,x⟩ + ⟨g(t),x⟩ + const`.
#[derive(Debug, Clone)]
pub struct QuadraticData {
    /// Row-major `n × n` symmetric positive definite matrix.
    pub a: Vec<f64>,
    pub g: Field,
}

pub fn make_quadratic_shift(n: usize, c: PeriodicPath) -> Result<CatalogPotential> {
    check_n(n, c.n())?;
    let metadata = format!(
        "a(r) = (r + {b:.6e})^2 + r + {b:.6e}, b(t) = 1",
        b = c.sup_bound()
    );
    Ok(CatalogPotential {
        kind: Kind::QuadraticShift { c },
        n,
        convexity: Convexity::StrictlyConvex,
        metadata,
    })
}

pub fn make_quadratic_form(matrix: &[f64], g: PeriodicPath) -> Result<CatalogPotential> {
    let n = g.n();
    if matrix.len() != n * n {
        return Err(Error::LengthMismatch {
            what: "quadratic form matrix",
            expected: n * n,
            got: matrix.len(),
        });
    }
    check_spd(matrix, n)?;
    let metadata = format!(
        "a(r) = |A| r^2 / 2 + (|A| + {b:.6e}) r + {b:.6e}, b(t) = 1",
        b = g.sup_bound()
    );
    Ok(CatalogPotential {
        kind: Kind::QuadraticForm {
            a: matrix.to_vec(),
            g,
        },
        n,
        convexity: Convexity::StrictlyConvex,
        metadata,
    })
}

pub fn make_linear_drift(n: usize, a: PeriodicPath) -> Result<CatalogPotential> {
    check_n(n, a.n())?;
    let metadata = format!("a(r) = {b:.6e} (1 + r), b(t) = 1", b = a.sup_bound());
    Ok(CatalogPotential {
        kind: Kind::LinearDrift { a },
        n,
        convexity: Convexity::Convex,
        metadata,
    })
}

pub fn make_log_sum_exp(n: usize, c: PeriodicPath, tilt: Vec<f64>) -> Result<CatalogPotential> {
    check_n(n, c.n())?;
    check_n(n, tilt.len())?;
    let metadata = format!(
        "a(r) = (1 + {t:.6e}) r + {b:.6e} + {n} ln 2 + {sn}, b(t) = 1",
        t = tilt.iter().map(|v| v * v).sum::<f64>().sqrt(),
        b = c.sup_bound() * n as f64,
        sn = (n as f64).sqrt(),
    );
    Ok(CatalogPotential {
        kind: Kind::LogSumExp { c, tilt },
        n,
        convexity: Convexity::StrictlyConvex,
        metadata,
    })
}

/// Builds `F(t,x) = ½|x|² + ⟨g(t), x⟩` with `g = Δu* − u*`, so that `u*`
/// solves `Δu = ∇F(t,u)` exactly. Returns the potential and `u*` sampled on
/// the grid.
pub fn make_manufactured(
    grid: &Arc<TorusGrid>,
    n: usize,
    target: &TrigSeries,
) -> Result<(CatalogPotential, Field)> {
    check_n(n, target.n)?;
    target.check_resolvable(grid)?;
    let exact = target.bind(grid.periods())?;
    let g = exact.map_spectrum(|k2| -k2 - 1.0);
    let mut identity = vec![0.0; n * n];
    (0..n).for_each(|i| identity[i * n + i] = 1.0);
    let mut pot = make_quadratic_form(&identity, g)?;
    pot.metadata = format!("manufactured; {}", pot.metadata);
    Ok((pot, exact.sample(grid)))
}

fn check_n(expected: usize, got: usize) -> Result<()> {
    if expected == 0 || expected != got {
        return Err(Error::ComponentMismatch { expected, got });
    }
    Ok(())
}

fn check_spd(matrix: &[f64], n: usize) -> Result<()> {
    for i in 0..n {
        for j in 0..i {
            let (a, b) = (matrix[i * n + j], matrix[j * n + i]);
            if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                return Err(Error::NotPositiveDefinite(format!(
                    "entries ({i},{j}) and ({j},{i}) differ"
                )));
            }
        }
    }
    DMatrix::from_row_slice(n, n, matrix)
        .cholesky()
        .map(|_| ())
        .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))
}

fn log_two_cosh(y: f64) -> f64 {
    let a = y.abs();
    a + (-2.0 * a).exp().ln_1p()
}

impl CatalogPotential {
    /// Quadratic data for the dense linear oracle, when the potential is
    /// quadratic in `x`.
    pub fn as_quadratic(&self, grid: &Arc<TorusGrid>) -> Option<QuadraticData> {
        match &self.kind {
            Kind::QuadraticShift { c } => {
                let n = self.n;
                let mut a = vec![0.0; n * n];
                (0..n).for_each(|i| a[i * n + i] = 1.0);
                let mut g = c.sample(grid);
                g.scale(-1.0);
                Some(QuadraticData { a, g })
            }
            Kind::QuadraticForm { a, g } => Some(QuadraticData {
                a: a.clone(),
                g: g.sample(grid),
            }),
            _ => None,
        }
    }
}

impl Potential for CatalogPotential {
    fn n(&self) -> usize {
        self.n
    }

    fn value(&self, t: &[f64], x: &[f64]) -> f64 {
        let n = self.n;
        match &self.kind {
            Kind::QuadraticShift { c } => {
                let mut ct = vec![0.0; n];
                c.eval(t, &mut ct);
                0.5 * x
                    .iter()
                    .zip(&ct)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            }
            Kind::QuadraticForm { a, g } => {
                let mut gt = vec![0.0; n];
                g.eval(t, &mut gt);
                let mut q = 0.0;
                for i in 0..n {
                    let row: f64 = (0..n).map(|j| a[i * n + j] * x[j]).sum();
                    q += 0.5 * x[i] * row + gt[i] * x[i];
                }
                q
            }
            Kind::LinearDrift { a } => {
                let mut at = vec![0.0; n];
                a.eval(t, &mut at);
                at.iter().zip(x).map(|(a, b)| a * b).sum()
            }
            Kind::LogSumExp { c, tilt } => {
                let mut ct = vec![0.0; n];
                c.eval(t, &mut ct);
                (0..n)
                    .map(|i| log_two_cosh(x[i] - ct[i]) + tilt[i] * x[i])
                    .sum()
            }
        }
    }

    fn gradient(&self, t: &[f64], x: &[f64], out: &mut [f64]) {
        let n = self.n;
        match &self.kind {
            Kind::QuadraticShift { c } => {
                c.eval(t, out);
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = xi - *o;
                }
            }
            Kind::QuadraticForm { a, g } => {
                g.eval(t, out);
                for i in 0..n {
                    out[i] += (0..n).map(|j| a[i * n + j] * x[j]).sum::<f64>();
                }
            }
            Kind::LinearDrift { a } => a.eval(t, out),
            Kind::LogSumExp { c, tilt } => {
                c.eval(t, out);
                for i in 0..n {
                    out[i] = (x[i] - out[i]).tanh() + tilt[i];
                }
            }
        }
    }

    fn hessian(&self, t: &[f64], x: &[f64], out: &mut [f64]) -> bool {
        let n = self.n;
        out.iter_mut().for_each(|v| *v = 0.0);
        match &self.kind {
            Kind::QuadraticShift { .. } => (0..n).for_each(|i| out[i * n + i] = 1.0),
            Kind::QuadraticForm { a, .. } => out.copy_from_slice(a),
            Kind::LinearDrift { .. } => {}
            Kind::LogSumExp { c, .. } => {
                let ct = c.eval_vec(t);
                for i in 0..n {
                    let th = (x[i] - ct[i]).tanh();
                    out[i * n + i] = 1.0 - th * th;
                }
            }
        }
        true
    }

    fn has_hessian(&self) -> bool {
        true
    }

    fn convexity(&self) -> Convexity {
        self.convexity
    }

    fn metadata(&self) -> &str {
        &self.metadata
    }
}

type ValueFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;
type VecFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;

/// Potential assembled from closures, for user-supplied `F`.
#[derive(Clone)]
pub struct FnPotential {
    n: usize,
    convexity: Convexity,
    value: Arc<ValueFn>,
    gradient: Arc<VecFn>,
    hessian: Option<Arc<VecFn>>,
    metadata: String,
}

impl fmt::Debug for FnPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnPotential")
            .field("n", &self.n)
            .field("convexity", &self.convexity)
            .field("has_hessian", &self.hessian.is_some())
            .finish()
    }
}

impl FnPotential {
    pub fn new(
        n: usize,
        convexity: Convexity,
        value: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            n,
            convexity,
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hessian: None,
            metadata: String::new(),
        }
    }

    pub fn with_hessian(
        mut self,
        hessian: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.hessian = Some(Arc::new(hessian));
        self
    }

    pub fn with_metadata(mut self, metadata: impl Into<String>) -> Self {
        self.metadata = metadata.into();
        self
    }
}

impl Potential for FnPotential {
    fn n(&self) -> usize {
        self.n
    }

    fn value(&self, t: &[f64], x: &[f64]) -> f64 {
        (self.value)(t, x)
    }

    fn gradient(&self, t: &[f64], x: &[f64], out: &mut [f64]) {
        (self.gradient)(t, x, out)
    }

    fn hessian(&self, t: &[f64], x: &[f64], out: &mut [f64]) -> bool {
        match &self.hessian {
            Some(h) => {
                h(t, x, out);
                true
            }
            None => false,
        }
    }

    fn has_hessian(&self) -> bool {
        self.hessian.is_some()
    }

    fn convexity(&self) -> Convexity {
        self.convexity
    }

    fn metadata(&self) -> &str {
        &self.metadata
    }
}

/// Serializable description of a catalog potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    QuadraticShift {
        c: TrigSeries,
    },
    QuadraticForm {
        matrix: Vec<Vec<f64>>,
        g: TrigSeries,
    },
    LinearDrift {
        a: TrigSeries,
    },
    LogSumExp {
        c: TrigSeries,
        #[serde(default)]
        tilt: Option<Vec<f64>>,
    },
    Manufactured {
        target: TrigSeries,
    },
}

impl PotentialSpec {
    pub fn n(&self) -> usize {
        match self {
            PotentialSpec::QuadraticShift { c } | PotentialSpec::LogSumExp { c, .. } => c.n,
            PotentialSpec::QuadraticForm { g, .. } => g.n,
            PotentialSpec::LinearDrift { a } => a.n,
            PotentialSpec::Manufactured { target } => target.n,
        }
    }

    /// Instantiates the potential on `grid`; the manufactured kind also
    /// returns its exact solution.
    pub fn build(&self, grid: &Arc<TorusGrid>) -> Result<(CatalogPotential, Option<Field>)> {
        let periods = grid.periods();
        match self {
            PotentialSpec::QuadraticShift { c } => {
                Ok((make_quadratic_shift(c.n, c.bind(periods)?)?, None))
            }
            PotentialSpec::QuadraticForm { matrix, g } => {
                if matrix.len() != g.n || matrix.iter().any(|row| row.len() != g.n) {
                    return Err(Error::Config(format!(
                        "quadratic_form matrix must be {0} x {0}",
                        g.n
                    )));
                }
                let flat: Vec<f64> = matrix.iter().flatten().copied().collect();
                Ok((make_quadratic_form(&flat, g.bind(periods)?)?, None))
            }
            PotentialSpec::LinearDrift { a } => {
                Ok((make_linear_drift(a.n, a.bind(periods)?)?, None))
            }
            PotentialSpec::LogSumExp { c, tilt } => {
                let tilt = tilt.clone().unwrap_or_else(|| vec![0.0; c.n]);
                Ok((make_log_sum_exp(c.n, c.bind(periods)?, tilt)?, None))
            }
            PotentialSpec::Manufactured { target } => {
                let (pot, exact) = make_manufactured(grid, target.n, target)?;
                Ok((pot, Some(exact)))
            }
        }
    }
}

fn sample_point(
    rng: &mut ChaCha8Rng,
    periods: &[f64],
    n: usize,
    radius: f64,
) -> (Vec<f64>, Vec<f64>) {
    let t = periods.iter().map(|&p| rng.random::<f64>() * p).collect();
    let x = (0..n).map(|_| rng.random_range(-radius..radius)).collect();
    (t, x)
}

/// Max relative discrepancy between `gradient` and central differences of
/// `value` over seeded samples `t ∈ box`, `x ∈ [−4, 4]ⁿ`.
pub fn check_gradient(pot: &dyn Potential, periods: &[f64], samples: usize, seed: u64) -> f64 {
    let n = pot.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grad = vec![0.0; n];
    let mut worst: f64 = 0.0;
    for _ in 0..samples.max(1) {
        let (t, mut x) = sample_point(&mut rng, periods, n, 4.0);
        pot.gradient(&t, &x, &mut grad);
        let norm_x = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let h = 1e-5 * (1.0 + norm_x);
        let mut fd = vec![0.0; n];
        for i in 0..n {
            let xi = x[i];
            x[i] = xi + h;
            let fp = pot.value(&t, &x);
            x[i] = xi - h;
            let fm = pot.value(&t, &x);
            x[i] = xi;
            fd[i] = (fp - fm) / (2.0 * h);
        }
        let err = grad
            .iter()
            .zip(&fd)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let scale = grad.iter().chain(&fd).fold(1e-3f64, |m, v| m.max(v.abs()));
        worst = worst.max(err / scale);
    }
    worst
}

/// Largest midpoint-convexity violation `F((x+y)/2) − ½F(x) − ½F(y)` over
/// seeded triples `(t, x, y)`. Non-positive when no violation was found.
pub fn check_convexity(pot: &dyn Potential, periods: &[f64], samples: usize, seed: u64) -> f64 {
    let n = pot.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples.max(1) {
        let (t, x) = sample_point(&mut rng, periods, n, 5.0);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
        let gap = pot.value(&t, &mid) - 0.5 * pot.value(&t, &x) - 0.5 * pot.value(&t, &y);
        worst = worst.max(gap);
    }
    worst
}
