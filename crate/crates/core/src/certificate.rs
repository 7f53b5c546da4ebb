//! Solvability certificates.
//!
//! For a strictly convex potential, the problem on the torus is solvable
//! exactly when the mean potential `G(x) = ∫ F(t, x) dt` has a stationary
//! point, and exactly when `G(x) → ∞` as `|x| → ∞`. [`certify`] checks both
//! conditions independently and reports a verdict; disagreement under strict
//! convexity is treated as an error rather than a verdict.
//!
//! The certificate also carries the discrete Wirtinger constant
//! `C₁ = 1/√λ_min⁺`, which bounds `‖ũ‖ ≤ C₁ ‖∂ũ/∂t‖` for zero-mean fields.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, TorusGrid};
use crate::linesearch::{self, LineSearchParams};
use crate::operators::{mean_decompose, DiffOperator};
use crate::potential::{Convexity, Potential};

/// Iterate-norm cap beyond which the stationary-mean search gives up.
pub const MEAN_SEARCH_CAP: f64 = 1e6;

/// Quadrature-backed mean potential `G(x) = ∫ F(t, x) dt`.
pub struct MeanPotential<'a> {
    pot: &'a dyn Potential,
    grid: Arc<TorusGrid>,
    coords: Vec<f64>,
}

impl std::fmt::Debug for MeanPotential<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MeanPotential")
            .field("n", &self.pot.n())
            .field("grid", &self.grid)
            .finish()
    }
}

pub fn build_mean_potential<'a>(
    grid: &Arc<TorusGrid>,
    pot: &'a dyn Potential,
) -> Result<MeanPotential<'a>> {
    if pot.n() == 0 {
        return Err(Error::ComponentMismatch {
            expected: 1,
            got: 0,
        });
    }
    Ok(MeanPotential {
        pot,
        grid: Arc::clone(grid),
        coords: grid.all_coords(),
    })
}

impl MeanPotential<'_> {
    pub fn n(&self) -> usize {
        self.pot.n()
    }

    fn nodes(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks(self.grid.p())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.grid.cell_weight() * self.nodes().map(|t| self.pot.value(t, x)).sum::<f64>()
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut acc = vec![0.0; n];
        let mut g = vec![0.0; n];
        for t in self.nodes() {
            self.pot.gradient(t, x, &mut g);
            acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
        acc.iter_mut().for_each(|a| *a *= self.grid.cell_weight());
        acc
    }

    /// Row-major Hessian of `G`, if the potential provides one.
    pub fn hessian(&self, x: &[f64]) -> Option<Vec<f64>> {
        if !self.pot.has_hessian() {
            return None;
        }
        let n = self.n();
        let mut acc = vec![0.0; n * n];
        let mut h = vec![0.0; n * n];
        for t in self.nodes() {
            if !self.pot.hessian(t, x, &mut h) {
                return None;
            }
            acc.iter_mut().zip(&h).for_each(|(a, b)| *a += b);
        }
        acc.iter_mut().for_each(|a| *a *= self.grid.cell_weight());
        Some(acc)
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryMean {
    pub x_bar: Option<Vec<f64>>,
    /// `|∇G|` at `x̄`, or at the last iterate when no point was found.
    pub grad_norm: f64,
    pub iterations: usize,
}

/// Descent from the origin for a point with `|∇G(x̄)| ≤ tol`. Uses damped
/// Newton steps where the Hessian of `G` is positive definite and gradient
/// steps otherwise. Gives up once the iterate norm exceeds
/// [`MEAN_SEARCH_CAP`] or after `max_iters` steps.
pub fn find_stationary_mean(
    g: &MeanPotential<'_>,
    tol: f64,
    max_iters: usize,
) -> Result<StationaryMean> {
    if !(tol > 0.0) {
        return Err(Error::InvalidOption(
            "stationary-mean tolerance must be positive".into(),
        ));
    }
    let n = g.n();
    let mut x = vec![0.0; n];
    let mut value = g.eval(&x);
    let mut grad = g.grad(&x);
    if !value.is_finite() || grad.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("mean potential at the origin".into()));
    }
    let ls = LineSearchParams::default();
    for iterations in 0..=max_iters {
        let gnorm = norm(&grad);
        if gnorm <= tol {
            return Ok(StationaryMean {
                x_bar: Some(x),
                grad_norm: gnorm,
                iterations,
            });
        }
        if norm(&x) > MEAN_SEARCH_CAP || iterations == max_iters {
            break;
        }
        let newton = g.hessian(&x).and_then(|h| {
            let chol = DMatrix::from_row_slice(n, n, &h).cholesky()?;
            let step = chol.solve(&DVector::from_iterator(n, grad.iter().map(|v| -v)));
            let step: Vec<f64> = step.iter().copied().collect();
            step.iter().all(|v| v.is_finite()).then_some(step)
        });
        let mut dir = newton.unwrap_or_else(|| grad.iter().map(|v| -v).collect());
        let mut d0 = dot(&grad, &dir);
        if !(d0 < 0.0) {
            dir = grad.iter().map(|v| -v).collect();
            d0 = -gnorm * gnorm;
        }
        let trial = linesearch::search(value, d0, 1.0, &ls, |alpha| {
            let xt: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + alpha * b).collect();
            let v = g.eval(&xt);
            if !v.is_finite() {
                return Ok(None);
            }
            let gt = g.grad(&xt);
            Ok(Some((v, dot(&gt, &dir), (xt, gt))))
        })?;
        match trial {
            Some(t) => {
                value = t.value;
                (x, grad) = t.payload;
            }
            None => break,
        }
    }
    Ok(StationaryMean {
        x_bar: None,
        grad_norm: norm(&grad),
        iterations: max_iters,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coercivity {
    Coercive,
    NotCoercive,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayProbe {
    pub direction: Vec<f64>,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoercivityReport {
    pub verdict: Coercivity,
    pub probes: Vec<RayProbe>,
}

pub const DEFAULT_RADII: [f64; 4] = [1.0, 10.0, 100.0, 1000.0];

/// Samples `G` along `directions` unit rays: the `2n` signed coordinate
/// axes first, then seeded random directions.
///
/// Coercive when `G` rises by at least 1 between the last two radii on every
/// ray; NotCoercive when some ray ends no more than 1 above where it
/// started; Inconclusive otherwise.
pub fn coercivity_probe(
    g: &MeanPotential<'_>,
    directions: usize,
    radii: &[f64],
    seed: u64,
) -> Result<CoercivityReport> {
    let n = g.n();
    if radii.len() < 3 || radii.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidOption(
            "radii must be increasing with at least 3 values".into(),
        ));
    }
    if directions < 2 * n {
        return Err(Error::InvalidOption(format!(
            "need at least {} directions",
            2 * n
        )));
    }
    let mut dirs = Vec::with_capacity(directions);
    for i in 0..n {
        for sign in [1.0, -1.0] {
            let mut d = vec![0.0; n];
            d[i] = sign;
            dirs.push(d);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while dirs.len() < directions {
        let d: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let len = norm(&d);
        if len > 1e-3 {
            dirs.push(d.iter().map(|v| v / len).collect());
        }
    }
    let probes: Vec<RayProbe> = dirs
        .into_par_iter()
        .map(|direction| {
            let values = radii
                .iter()
                .map(|&r| {
                    let x: Vec<f64> = direction.iter().map(|d| r * d).collect();
                    g.eval(&x)
                })
                .collect();
            RayProbe {
                direction,
                radii: radii.to_vec(),
                values,
            }
        })
        .collect();

    let last = radii.len() - 1;
    let coercive = probes
        .iter()
        .all(|p| p.values[last] - p.values[last - 1] >= 1.0);
    let flat = probes.iter().any(|p| !(p.values[last] > p.values[0] + 1.0));
    let verdict = if coercive {
        Coercivity::Coercive
    } else if flat {
        Coercivity::NotCoercive
    } else {
        Coercivity::Inconclusive
    };
    Ok(CoercivityReport { verdict, probes })
}

/// `1/√λ_min⁺` for the operator's smallest nonzero eigenvalue.
pub fn wirtinger_constant(op: &DiffOperator) -> f64 {
    1.0 / op.smallest_nonzero_eigenvalue().sqrt()
}

/// `‖ũ‖ / ‖∂ũ/∂t‖` for the zero-mean part of `u`; `None` when `ũ` vanishes.
pub fn wirtinger_ratio(op: &DiffOperator, u: &Field) -> Result<Option<f64>> {
    let (_, fluct) = mean_decompose(u);
    let energy = op.dirichlet_form(&fluct, &fluct)?;
    let mass = fluct.l2_dot(&fluct);
    if !(energy > 0.0) || mass <= 1e-28 * u.grid().volume() {
        return Ok(None);
    }
    Ok(Some((mass / energy).sqrt()))
}

/// The extremal field `sin(2π t^α / T^α)` along the axis whose unit
/// frequency attains `λ_min⁺`.
pub fn lowest_harmonic(op: &DiffOperator) -> Field {
    let grid = op.grid();
    let axis = (0..grid.p())
        .min_by(|&a, &b| {
            let ea = op.eigenvalues()[grid.stride(a)];
            let eb = op.eigenvalues()[grid.stride(b)];
            ea.total_cmp(&eb)
        })
        .unwrap_or(0);
    let period = grid.periods()[axis];
    Field::from_fn(grid, 1, |t, out| {
        out[0] = (2.0 * std::f64::consts::PI * t[axis] / period).sin()
    })
}

/// Max Wirtinger ratio over `trials` seeded random fields (two components,
/// entries uniform in `[−1, 1]`, mean removed).
pub fn wirtinger_audit(op: &DiffOperator, trials: usize, seed: u64) -> Result<f64> {
    let grid = op.grid();
    let ratios: Vec<Option<f64>> = (0..trials.max(1))
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial as u64));
            let u = Field::from_fn(grid, 2, |_, out| {
                for o in out.iter_mut() {
                    *o = rng.random_range(-1.0..1.0);
                }
            });
            wirtinger_ratio(op, &u)
        })
        .collect::<Result<_>>()?;
    Ok(ratios.into_iter().flatten().fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyOptions {
    /// Absolute tolerance on `|∇G(x̄)|`; defaults to `1e-9 · max(1, vol)`.
    pub tol: Option<f64>,
    pub max_iters: usize,
    /// Number of probe rays; defaults to `max(4n, 8)`.
    pub directions: Option<usize>,
    pub radii: Vec<f64>,
    pub seed: u64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            tol: None,
            max_iters: 500,
            directions: None,
            radii: DEFAULT_RADII.to_vec(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Solvable,
    NotSolvable,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolvabilityCertificate {
    pub x_bar: Option<Vec<f64>>,
    pub grad_g_norm_at_x_bar: f64,
    pub coercivity: Coercivity,
    pub ray_probes: Vec<RayProbe>,
    pub wirtinger_constant: f64,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

pub fn certify(
    grid: &Arc<TorusGrid>,
    pot: &dyn Potential,
    op: &DiffOperator,
    opts: &CertifyOptions,
) -> Result<SolvabilityCertificate> {
    if **op.grid() != **grid {
        return Err(Error::GridMismatch);
    }
    let g = build_mean_potential(grid, pot)?;
    let n = pot.n();
    let tol = opts.tol.unwrap_or(1e-9 * grid.volume().max(1.0));
    let stationary = find_stationary_mean(&g, tol, opts.max_iters)?;
    let directions = opts.directions.unwrap_or((4 * n).max(8));
    let probe = coercivity_probe(&g, directions, &opts.radii, opts.seed)?;

    let found = stationary.x_bar.is_some();
    let verdict = match (found, probe.verdict) {
        (true, _) => Verdict::Solvable,
        (false, Coercivity::NotCoercive) => Verdict::NotSolvable,
        _ => Verdict::Inconclusive,
    };
    let mut notes = Vec::new();
    match pot.convexity() {
        Convexity::StrictlyConvex => {
            let clash = (found && probe.verdict == Coercivity::NotCoercive)
                || (!found && probe.verdict == Coercivity::Coercive);
            if clash {
                return Err(Error::Consistency(format!(
                    "stationary mean {} but coercivity probe {:?}",
                    if found { "found" } else { "not found" },
                    probe.verdict
                )));
            }
            if probe.verdict == Coercivity::Inconclusive {
                notes.push("coercivity probe inconclusive at the chosen radii".into());
            }
        }
        Convexity::Convex | Convexity::NonConvexUnchecked => {
            if found && probe.verdict != Coercivity::Coercive {
                notes.push(
                    "coercivity inconclusive: the potential is not strictly convex, so a stationary mean does not imply growth of G".into(),
                );
            }
        }
    }
    Ok(SolvabilityCertificate {
        x_bar: stationary.x_bar,
        grad_g_norm_at_x_bar: stationary.grad_norm,
        coercivity: probe.verdict,
        ray_probes: probe.probes,
        wirtinger_constant: wirtinger_constant(op),
        verdict,
        notes,
    })
}
