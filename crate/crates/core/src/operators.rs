//! Discrete differential operators on the torus and the action functional
//! `φ(u) = ∫ ½|∂u/∂t|² + F(t, u)`.
//!
//! Both schemes are diagonal in the discrete Fourier basis. The Laplacian
//! `Δ_h` multiplies mode `k` by `−λ_k`; the kinetic energy and every
//! `∫⟨∂u, ∂v⟩` pairing are evaluated as the Dirichlet form
//! `−∫⟨u, Δ_h v⟩`, so discrete integration by parts holds exactly and the
//! action gradient is `−Δ_h u + ∇F(t, u)` with no consistency error.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{signed_frequency, NdFft};
use crate::grid::{Field, TorusGrid};
use crate::potential::Potential;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Fourier differentiation; exact on resolvable trigonometric modes.
    Spectral,
    /// Second-order finite differences.
    Fd2,
}

#[derive(Debug, Clone)]
pub struct DiffOperator {
    scheme: Scheme,
    grid: Arc<TorusGrid>,
    eigenvalues: Vec<f64>,
    fft: NdFft,
}

/// `∂u^i/∂t^α` at every node, laid out `[node][component][axis]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    grid: Arc<TorusGrid>,
    n: usize,
    partials: Vec<f64>,
}

impl GradientField {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn partials(&self) -> &[f64] {
        &self.partials
    }

    pub fn get(&self, node: usize, component: usize, axis: usize) -> f64 {
        let p = self.grid.p();
        self.partials[(node * self.n + component) * p + axis]
    }

    /// `|∂u/∂t|²` at each node.
    pub fn squared_norms(&self) -> Vec<f64> {
        self.partials
            .chunks(self.n * self.grid.p())
            .map(|c| c.iter().map(|v| v * v).sum())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionReport {
    /// `½∫|∂u/∂t|²`
    pub kinetic: f64,
    /// `∫F(t, u)`
    pub potential_part: f64,
    pub total: f64,
    /// Max-norm of the L² action gradient.
    pub grad_inf_norm: f64,
}

impl DiffOperator {
    pub fn new(grid: &Arc<TorusGrid>, scheme: Scheme) -> Self {
        let p = grid.p();
        let mut eigenvalues = vec![0.0; grid.node_count()];
        let mut k = vec![0usize; p];
        for (node, lambda) in eigenvalues.iter_mut().enumerate() {
            unravel(grid, node, &mut k);
            *lambda = (0..p)
                .map(|a| {
                    let n = grid.resolutions()[a];
                    match scheme {
                        Scheme::Spectral => {
                            let kappa =
                                2.0 * PI * signed_frequency(k[a], n) as f64 / grid.periods()[a];
                            kappa * kappa
                        }
                        Scheme::Fd2 => {
                            let h = grid.spacings()[a];
                            2.0 / (h * h) * (1.0 - (2.0 * PI * k[a] as f64 / n as f64).cos())
                        }
                    }
                })
                .sum();
        }
        eigenvalues[0] = 0.0;
        Self {
            scheme,
            grid: Arc::clone(grid),
            eigenvalues,
            fft: NdFft::new(grid),
        }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    /// Eigenvalues `λ_k ≥ 0` of `−Δ_h`, indexed like the grid nodes.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `min_{k ≠ 0} λ_k`.
    pub fn smallest_nonzero_eigenvalue(&self) -> f64 {
        self.eigenvalues[1..]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    fn check(&self, u: &Field) -> Result<()> {
        if !Arc::ptr_eq(u.grid(), &self.grid) && **u.grid() != *self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    pub fn laplacian(&self, u: &Field) -> Result<Field> {
        self.check(u)?;
        let symbol: Vec<f64> = self.eigenvalues.iter().map(|l| -l).collect();
        Ok(self.fft.apply_real(u, &symbol))
    }

    /// Applies `f(λ_k)` to each Fourier mode of every component.
    pub fn apply_symbol(&self, u: &Field, f: impl Fn(f64) -> f64) -> Result<Field> {
        self.check(u)?;
        let symbol: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        Ok(self.fft.apply_real(u, &symbol))
    }

    /// Inverse of the H¹ Riesz map: divides mode `k` by `1 + λ_k`.
    pub fn precondition_h1(&self, g: &Field) -> Result<Field> {
        self.apply_symbol(g, |l| 1.0 / (1.0 + l))
    }

    /// Returns `(½∫|∂u/∂t|², Δ_h u)` from a single forward transform per
    /// component. The kinetic term is a sum of non-negative spectral
    /// contributions, so it is never negative.
    pub fn kinetic_and_laplacian(&self, u: &Field) -> Result<(f64, Field)> {
        self.check(u)?;
        let m = self.grid.node_count();
        let n = u.n();
        let scale = 1.0 / m as f64;
        let mut lap = Field::zeros(u.grid(), n);
        let mut energy = 0.0;
        for i in 0..n {
            let mut buf = self.fft.spectrum(&u.component(i));
            for (c, &l) in buf.iter_mut().zip(&self.eigenvalues) {
                energy += l * c.norm_sqr();
                *c *= -l;
            }
            self.fft.inverse(&mut buf);
            let re: Vec<f64> = buf.iter().map(|c| c.re * scale).collect();
            lap.set_component(i, &re);
        }
        // Parseval: Σ_nodes |a|² = (1/M) Σ_k |â_k|²
        let kinetic = 0.5 * self.grid.cell_weight() * energy * scale;
        Ok((kinetic, lap))
    }

    /// `∫⟨∂u, ∂v⟩` realized as `−∫⟨u, Δ_h v⟩`.
    pub fn dirichlet_form(&self, u: &Field, v: &Field) -> Result<f64> {
        u.same_shape(v)?;
        let lap = self.laplacian(v)?;
        Ok(-u.l2_dot(&lap))
    }
}

fn unravel(grid: &TorusGrid, mut node: usize, k: &mut [usize]) {
    for axis in (0..grid.p()).rev() {
        let n = grid.resolutions()[axis];
        k[axis] = node % n;
        node /= n;
    }
}

/// First partials: Fourier differentiation for [`Scheme::Spectral`] (the
/// Nyquist mode has zero derivative at the nodes), centered differences
/// `(u_{k+1} − u_{k−1}) / 2h` with wraparound for [`Scheme::Fd2`].
pub fn partials(op: &DiffOperator, u: &Field) -> Result<GradientField> {
    op.check(u)?;
    let grid = op.grid();
    let (m, n, p) = (grid.node_count(), u.n(), grid.p());
    let mut out = vec![0.0; m * n * p];
    match op.scheme {
        Scheme::Spectral => {
            let mut k = vec![0usize; p];
            for axis in 0..p {
                let symbol: Vec<Complex64> = (0..m)
                    .map(|node| {
                        unravel(grid, node, &mut k);
                        let nn = grid.resolutions()[axis];
                        if 2 * k[axis] == nn {
                            return Complex64::default();
                        }
                        let kappa =
                            2.0 * PI * signed_frequency(k[axis], nn) as f64 / grid.periods()[axis];
                        Complex64::new(0.0, kappa)
                    })
                    .collect();
                let d = op.fft.apply(u, &symbol);
                for node in 0..m {
                    for i in 0..n {
                        out[(node * n + i) * p + axis] = d.at(node)[i];
                    }
                }
            }
        }
        Scheme::Fd2 => {
            let mut k = vec![0usize; p];
            for node in 0..m {
                unravel(grid, node, &mut k);
                for axis in 0..p {
                    let nn = grid.resolutions()[axis];
                    let stride = grid.stride(axis);
                    let base = node - k[axis] * stride;
                    let fwd = base + ((k[axis] + 1) % nn) * stride;
                    let bwd = base + ((k[axis] + nn - 1) % nn) * stride;
                    let h = grid.spacings()[axis];
                    for i in 0..n {
                        out[(node * n + i) * p + axis] = (u.at(fwd)[i] - u.at(bwd)[i]) / (2.0 * h);
                    }
                }
            }
        }
    }
    Ok(GradientField {
        grid: Arc::clone(grid),
        n,
        partials: out,
    })
}

pub fn laplacian(op: &DiffOperator, u: &Field) -> Result<Field> {
    op.laplacian(u)
}

/// `⟨u, v⟩_{H¹} = ∫ ⟨u, v⟩ + ⟨∂u, ∂v⟩`.
pub fn h1_inner(u: &Field, v: &Field, op: &DiffOperator) -> Result<f64> {
    u.same_shape(v)?;
    Ok(u.l2_dot(v) + op.dirichlet_form(u, v)?)
}

pub fn h1_norm(u: &Field, op: &DiffOperator) -> Result<f64> {
    Ok(h1_inner(u, u, op)?.max(0.0).sqrt())
}

fn check_potential(u: &Field, pot: &dyn Potential) -> Result<()> {
    if pot.n() != u.n() {
        return Err(Error::ComponentMismatch {
            expected: u.n(),
            got: pot.n(),
        });
    }
    Ok(())
}

/// Node values `F(t_k, u_k)` and gradients `∇F(t_k, u_k)`.
pub(crate) fn potential_terms(u: &Field, pot: &dyn Potential) -> (Vec<f64>, Field) {
    let grid = u.grid();
    let n = u.n();
    let mut values = vec![0.0; grid.node_count()];
    let mut grads = Field::zeros(grid, n);
    let mut t = vec![0.0; grid.p()];
    for (node, (val, g)) in values
        .iter_mut()
        .zip(grads.values_mut().chunks_mut(n))
        .enumerate()
    {
        grid.coords_of(node, &mut t);
        let x = u.at(node);
        *val = pot.value(&t, x);
        pot.gradient(&t, x, g);
    }
    (values, grads)
}

/// Action report together with the L² gradient `−Δ_h u + ∇F(t, u)`.
pub fn action_and_gradient(
    u: &Field,
    pot: &dyn Potential,
    op: &DiffOperator,
) -> Result<(ActionReport, Field)> {
    check_potential(u, pot)?;
    let (kinetic, lap) = op.kinetic_and_laplacian(u)?;
    let (values, mut grad) = potential_terms(u, pot);
    let potential_part = u.grid().integrate(&values)?;
    grad.add_scaled(-1.0, &lap);
    let report = ActionReport {
        kinetic,
        potential_part,
        total: kinetic + potential_part,
        grad_inf_norm: grad.max_abs(),
    };
    Ok((report, grad))
}

pub fn eval_action(u: &Field, pot: &dyn Potential, op: &DiffOperator) -> Result<ActionReport> {
    action_and_gradient(u, pot, op).map(|(r, _)| r)
}

/// Action value only; skips the inverse transforms.
pub fn action_value(u: &Field, pot: &dyn Potential, op: &DiffOperator) -> Result<f64> {
    check_potential(u, pot)?;
    let (kinetic, _) = op.kinetic_and_laplacian(u)?;
    let (values, _) = potential_terms(u, pot);
    Ok(kinetic + u.grid().integrate(&values)?)
}

/// L² gradient of the discrete action: the directional derivative along `v`
/// is `∫⟨g, v⟩`.
pub fn action_gradient(u: &Field, pot: &dyn Potential, op: &DiffOperator) -> Result<Field> {
    action_and_gradient(u, pot, op).map(|(_, g)| g)
}

/// `∫ ⟨∂u, ∂v⟩ + ⟨∇F(t, u), v⟩`, the first variation of the action at `u`
/// in direction `v`.
pub fn weak_pairing(u: &Field, v: &Field, pot: &dyn Potential, op: &DiffOperator) -> Result<f64> {
    u.same_shape(v)?;
    check_potential(u, pot)?;
    let (_, grads) = potential_terms(u, pot);
    Ok(op.dirichlet_form(u, v)? + grads.l2_dot(v))
}

/// Max- and L²-norms of `Δ_h u − ∇F(t, u)`.
pub fn pde_residual(u: &Field, pot: &dyn Potential, op: &DiffOperator) -> Result<(f64, f64)> {
    check_potential(u, pot)?;
    let mut r = op.laplacian(u)?;
    let (_, grads) = potential_terms(u, pot);
    r.add_scaled(-1.0, &grads);
    Ok((r.max_abs(), r.l2_norm()))
}

/// Per-component quadrature of `∇F(t, u(t))`. It vanishes at any stationary
/// point because the Laplacian annihilates the mean mode.
pub fn mean_force(u: &Field, pot: &dyn Potential) -> Result<Vec<f64>> {
    check_potential(u, pot)?;
    let (_, grads) = potential_terms(u, pot);
    let (mean, _) = mean_decompose(&grads);
    let vol = u.grid().volume();
    Ok(mean.iter().map(|m| m * vol).collect())
}

/// Splits `u = ū + ũ` with `ū` the volume average.
pub fn mean_decompose(u: &Field) -> (Vec<f64>, Field) {
    let grid = u.grid();
    let n = u.n();
    let m = grid.node_count() as f64;
    let mut mean = vec![0.0; n];
    for chunk in u.values().chunks(n) {
        for (acc, v) in mean.iter_mut().zip(chunk) {
            *acc += v;
        }
    }
    // integrate / vol == Σ / M for equal weights
    mean.iter_mut().for_each(|v| *v /= m);
    let mut fluct = u.clone();
    for chunk in fluct.values_mut().chunks_mut(n) {
        for (v, mu) in chunk.iter_mut().zip(&mean) {
            *v -= mu;
        }
    }
    (mean, fluct)
}

/// Evaluates the trigonometric interpolant of `u` and of every first
/// partial on the opposite faces `t^axis = 0` and `t^axis = T^axis`, and
/// returns the largest mismatch.
pub fn face_periodicity_audit(u: &Field, axis: usize) -> Result<f64> {
    let grid = u.grid();
    let p = grid.p();
    if axis >= p {
        return Err(Error::BadAxis { axis, p });
    }
    let spectral = DiffOperator::new(grid, Scheme::Spectral);
    let d = partials(&spectral, u)?;
    let n = u.n();
    let m = grid.node_count();
    let mut channels: Vec<Vec<f64>> = (0..n).map(|i| u.component(i)).collect();
    for i in 0..n {
        for beta in 0..p {
            channels.push((0..m).map(|node| d.get(node, i, beta)).collect());
        }
    }

    let nn = grid.resolutions()[axis];
    let slope_scale = 2.0 * PI / grid.periods()[axis];
    let stride = grid.stride(axis);
    let block = nn * stride;
    let mut worst: f64 = 0.0;
    let mut line = vec![0.0; nn];
    for data in &channels {
        for outer in (0..m).step_by(block) {
            for inner in 0..stride {
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = data[outer + inner + j * stride];
                }
                let lo = interpolant_value_and_slope(&line, 0.0);
                let hi = interpolant_value_and_slope(&line, 1.0);
                worst = worst
                    .max((lo.0 - hi.0).abs())
                    .max((lo.1 - hi.1).abs() * slope_scale);
            }
        }
    }
    Ok(worst)
}

/// Real trigonometric interpolant of equispaced samples and its derivative
/// with respect to `2π s`, where `s = t / T` is the normalized coordinate.
fn interpolant_value_and_slope(samples: &[f64], s: f64) -> (f64, f64) {
    let n = samples.len();
    let inv = 1.0 / n as f64;
    let mut value = 0.0;
    let mut slope = 0.0;
    for k in 0..=n / 2 {
        let (mut re, mut im) = (0.0, 0.0);
        for (j, &v) in samples.iter().enumerate() {
            let phase = -2.0 * PI * ((k * j) % n) as f64 * inv;
            re += v * phase.cos();
            im += v * phase.sin();
        }
        let theta = 2.0 * PI * k as f64 * s;
        let (sn, cs) = theta.sin_cos();
        let weight = if k == 0 || 2 * k == n { 1.0 } else { 2.0 };
        value += weight * inv * (re * cs - im * sn);
        if 2 * k == n {
            slope -= inv * k as f64 * re * sn;
        } else {
            slope -= weight * inv * k as f64 * (re * sn + im * cs);
        }
    }
    (value, slope)
}

/// `Φ(λ) = φ(u + λv)` for each requested `λ`.
pub fn line_probe(
    u: &Field,
    v: &Field,
    pot: &dyn Potential,
    op: &DiffOperator,
    lambdas: &[f64],
) -> Result<Vec<f64>> {
    u.same_shape(v)?;
    lambdas
        .iter()
        .map(|&lambda| {
            if !lambda.is_finite() {
                return Err(Error::NonFinite(format!("probe parameter {lambda}")));
            }
            action_value(&u.axpy(lambda, v), pot, op)
        })
        .collect()
}
