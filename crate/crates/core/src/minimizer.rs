//! Minimization of the discrete action.
//!
//! Descent runs in the weighted L² geometry of the grid, optionally
//! preconditioned by the H¹ Riesz map. A run stops when the action gradient
//! (equivalently the PDE residual `Δ_h u − ∇F`) is small, when the iteration
//! cap is hit, or when the mean of `u` escapes to infinity while its
//! fluctuation stays bounded, which witnesses a non-coercive mean potential.

use std::collections::VecDeque;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, TorusGrid};
use crate::linesearch::{self, LineSearchParams};
use crate::operators::{
    action_and_gradient, mean_decompose, pde_residual, ActionReport, DiffOperator,
};
use crate::potential::Potential;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    GradientDescent,
    NonlinearCg,
    Lbfgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmijoParams {
    pub c1: f64,
    pub backtrack: f64,
    pub max_halvings: usize,
}

impl Default for ArmijoParams {
    fn default() -> Self {
        Self {
            c1: 1e-4,
            backtrack: 0.5,
            max_halvings: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub method: Method,
    pub precondition_h1: bool,
    pub tol_grad_inf: f64,
    pub tol_residual_inf: f64,
    pub max_iters: usize,
    pub divergence_mean_norm: f64,
    pub armijo: ArmijoParams,
    pub lbfgs_memory: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            method: Method::Lbfgs,
            precondition_h1: true,
            tol_grad_inf: 1e-8,
            tol_residual_inf: 1e-6,
            max_iters: 10_000,
            divergence_mean_norm: 1e6,
            armijo: ArmijoParams::default(),
            lbfgs_memory: 10,
            seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidOption(msg.to_string()));
        if !(self.tol_grad_inf > 0.0 && self.tol_residual_inf > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.divergence_mean_norm > 0.0) {
            return bad("divergence_mean_norm must be positive");
        }
        if !(self.armijo.backtrack > 0.0 && self.armijo.backtrack < 1.0) {
            return bad("backtrack factor must lie in (0, 1)");
        }
        if !(self.armijo.c1 > 0.0 && self.armijo.c1 < 0.5) {
            return bad("Armijo constant must lie in (0, 0.5)");
        }
        if self.lbfgs_memory == 0 {
            return bad("lbfgs_memory must be at least 1");
        }
        Ok(())
    }

    fn line_search(&self) -> LineSearchParams {
        LineSearchParams {
            c1: self.armijo.c1,
            backtrack: self.armijo.backtrack,
            max_backtracks: self.armijo.max_halvings,
            ..LineSearchParams::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIters,
    DivergedNonCoercive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub action: f64,
    pub grad_inf: f64,
    pub mean_norm: f64,
    pub fluctuation_h1: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub u: Field,
    pub status: SolveStatus,
    pub iterations: usize,
    pub action: ActionReport,
    pub residual_inf: f64,
    pub residual_l2: f64,
    pub mean: Vec<f64>,
    pub fluctuation_h1_norm: f64,
    pub trace: Vec<TraceEntry>,
    pub seed: u64,
    pub line_search_failed: bool,
    pub notes: Vec<String>,
}

/// Evidence that the mean escaped while the fluctuation stayed bounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceSignal {
    pub iteration: usize,
    pub mean_norm: f64,
    pub fluctuation_h1: f64,
}

struct State {
    u: Field,
    report: ActionReport,
    grad: Field,
}

impl State {
    fn new(u: Field, pot: &dyn Potential, op: &DiffOperator) -> Result<Self> {
        let (report, grad) = action_and_gradient(&u, pot, op)?;
        Ok(Self { u, report, grad })
    }

    fn trace_entry(&self, iteration: usize) -> TraceEntry {
        let (mean, fluct) = mean_decompose(&self.u);
        let fluct_l2 = fluct.l2_dot(&fluct);
        TraceEntry {
            iteration,
            action: self.report.total,
            grad_inf: self.report.grad_inf_norm,
            mean_norm: norm(&mean),
            // kinetic energy ignores the constant mode, so it equals that of ũ
            fluctuation_h1: (fluct_l2 + 2.0 * self.report.kinetic).sqrt(),
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_finite(report: &ActionReport, grad: &Field) -> Result<()> {
    if !report.total.is_finite() || grad.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(
            "action or gradient at the initial field".into(),
        ));
    }
    Ok(())
}

/// Zero field plus seeded uniform noise of amplitude `1e-3`.
pub fn default_init(grid: &std::sync::Arc<TorusGrid>, n: usize, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Field::from_fn(grid, n, |_, out| {
        for o in out.iter_mut() {
            *o = rng.random_range(-1e-3..1e-3);
        }
    })
}

/// Signals when the latest mean norm exceeds `divergence_mean_norm`, the
/// action has decreased over the run, and the fluctuation H¹ norm is within
/// ten times its running median.
pub fn divergence_monitor(trace: &[TraceEntry], opts: &SolverOptions) -> Option<DivergenceSignal> {
    let last = trace.last()?;
    let first = trace.first()?;
    if last.mean_norm < opts.divergence_mean_norm || last.action >= first.action {
        return None;
    }
    let mut fluct: Vec<f64> = trace.iter().map(|e| e.fluctuation_h1).collect();
    fluct.sort_by(f64::total_cmp);
    let median = fluct[fluct.len() / 2];
    if last.fluctuation_h1 > 10.0 * median + 1e-9 {
        return None;
    }
    Some(DivergenceSignal {
        iteration: last.iteration,
        mean_norm: last.mean_norm,
        fluctuation_h1: last.fluctuation_h1,
    })
}

struct Lbfgs {
    memory: usize,
    pairs: VecDeque<(Field, Field, f64)>,
}

impl Lbfgs {
    fn new(memory: usize) -> Self {
        Self {
            memory,
            pairs: VecDeque::with_capacity(memory),
        }
    }

    fn push(&mut self, s: Field, y: Field) {
        let sy = s.l2_dot(&y);
        if sy <= 1e-14 * s.l2_norm() * y.l2_norm() || !sy.is_finite() {
            return;
        }
        if self.pairs.len() == self.memory {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
    }

    fn direction(&self, g: &Field, precond: &dyn Fn(&Field) -> Result<Field>) -> Result<Field> {
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * s.l2_dot(&q);
            q.add_scaled(-a, y);
            alphas.push(a);
        }
        let mut r = precond(&q)?;
        if let Some((s, y, _)) = self.pairs.back() {
            let hy = precond(y)?;
            let gamma = s.l2_dot(y) / y.l2_dot(&hy);
            if gamma.is_finite() && gamma > 0.0 {
                r.scale(gamma);
            }
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * y.l2_dot(&r);
            r.add_scaled(a - b, s);
        }
        r.scale(-1.0);
        Ok(r)
    }
}

/// Minimizes the discrete action from `init` (or the default noisy zero
/// field) and returns the final iterate with full diagnostics.
pub fn solve(
    grid: &std::sync::Arc<TorusGrid>,
    pot: &dyn Potential,
    op: &DiffOperator,
    opts: &SolverOptions,
    init: Option<Field>,
) -> Result<SolveResult> {
    opts.validate()?;
    if **op.grid() != **grid {
        return Err(Error::GridMismatch);
    }
    let u0 = match init {
        Some(u) => {
            if **u.grid() != **grid {
                return Err(Error::GridMismatch);
            }
            if u.n() != pot.n() {
                return Err(Error::ComponentMismatch {
                    expected: pot.n(),
                    got: u.n(),
                });
            }
            u
        }
        None => default_init(grid, pot.n(), opts.seed),
    };
    let mut state = State::new(u0, pot, op)?;
    check_finite(&state.report, &state.grad)?;

    let precond = |g: &Field| -> Result<Field> {
        if opts.precondition_h1 {
            op.precondition_h1(g)
        } else {
            Ok(g.clone())
        }
    };
    let ls = opts.line_search();
    let mut trace = vec![state.trace_entry(0)];
    let mut lbfgs = Lbfgs::new(opts.lbfgs_memory);
    let mut prev_dir: Option<Field> = None;
    let mut prev_z: Option<Field> = None;
    let mut prev_gz = 0.0;
    let mut prev_alpha = 1.0;
    let mut line_search_failed = false;
    let mut notes = Vec::new();
    let mut iteration = 0;

    let status = loop {
        let grad_inf = state.report.grad_inf_norm;
        if grad_inf <= opts.tol_grad_inf && grad_inf <= opts.tol_residual_inf {
            break SolveStatus::Converged;
        }
        if let Some(sig) = divergence_monitor(&trace, opts) {
            notes.push(format!(
                "mean norm {:.3e} exceeded the divergence threshold at iteration {} with fluctuation H1 norm {:.3e}",
                sig.mean_norm, sig.iteration, sig.fluctuation_h1
            ));
            break SolveStatus::DivergedNonCoercive;
        }
        if iteration >= opts.max_iters {
            break SolveStatus::MaxIters;
        }

        let z = precond(&state.grad)?;
        let gz = state.grad.l2_dot(&z);
        let mut dir = match opts.method {
            Method::GradientDescent => {
                let mut d = z.clone();
                d.scale(-1.0);
                d
            }
            Method::NonlinearCg => {
                let mut d = z.clone();
                d.scale(-1.0);
                if let (Some(pd), Some(pz)) = (&prev_dir, &prev_z) {
                    // Polak–Ribière+, preconditioned
                    let mut dz = z.clone();
                    dz.add_scaled(-1.0, pz);
                    let beta = (state.grad.l2_dot(&dz) / prev_gz).max(0.0);
                    if beta.is_finite() {
                        d.add_scaled(beta, pd);
                    }
                }
                d
            }
            Method::Lbfgs => lbfgs.direction(&state.grad, &precond)?,
        };
        let mut d0 = state.grad.l2_dot(&dir);
        if !(d0 < 0.0) {
            dir = z.clone();
            dir.scale(-1.0);
            d0 = -gz;
            lbfgs.pairs.clear();
        }
        if !(d0 < 0.0) {
            // gradient vanishes in the preconditioned metric
            break SolveStatus::Converged;
        }

        let alpha0 = match opts.method {
            Method::Lbfgs => 1.0,
            _ => prev_alpha,
        };
        let f0 = state.report.total;
        let trial = linesearch::search(f0, d0, alpha0, &ls, |alpha| {
            let u = state.u.axpy(alpha, &dir);
            let (report, grad) = action_and_gradient(&u, pot, op)?;
            let slope = grad.l2_dot(&dir);
            Ok(Some((report.total, slope, State { u, report, grad })))
        })?;
        let Some(trial) = trial else {
            if !lbfgs.pairs.is_empty() || prev_dir.is_some() {
                // retry once from steepest descent
                lbfgs.pairs.clear();
                prev_dir = None;
                prev_z = None;
                prev_alpha = 1.0;
                notes.push(format!("line search restarted at iteration {iteration}"));
                continue;
            }
            line_search_failed = true;
            notes.push(format!(
                "line search failed after {} halvings at iteration {iteration}",
                opts.armijo.max_halvings
            ));
            break SolveStatus::MaxIters;
        };
        let mut next = trial.payload;
        if trial.alpha > alpha0 {
            if let Some(split) = block_step(&state, &dir, pot, op, &ls)? {
                if split.report.total < trial.value {
                    next = split;
                }
            }
        }

        let mut s = next.u.clone();
        s.add_scaled(-1.0, &state.u);
        let mut y = next.grad.clone();
        y.add_scaled(-1.0, &state.grad);
        if opts.method == Method::Lbfgs {
            lbfgs.push(s, y);
        }
        prev_alpha = trial.alpha;
        prev_dir = Some(dir);
        prev_z = Some(z);
        prev_gz = gz;
        state = next;
        iteration += 1;
        trace.push(state.trace_entry(iteration));
    };

    finish(
        state,
        status,
        iteration,
        trace,
        opts.seed,
        line_search_failed,
        notes,
        pot,
        op,
    )
}

/// Searches the fluctuation part of `dir` and then its mean part. Long steps
/// that suit the mean would otherwise also scale the fluctuation part, which
/// has bounded curvature.
fn block_step(
    state: &State,
    dir: &Field,
    pot: &dyn Potential,
    op: &DiffOperator,
    ls: &LineSearchParams,
) -> Result<Option<State>> {
    let (mean_dir, fluct_dir) = mean_decompose(dir);
    let mean_dir = Field::constant(dir.grid(), &mean_dir);
    let mut current: Option<State> = None;
    for block in [&fluct_dir, &mean_dir] {
        let base = current.as_ref().unwrap_or(state);
        let d0 = base.grad.l2_dot(block);
        if !(d0 < 0.0) {
            continue;
        }
        let trial = linesearch::search(base.report.total, d0, 1.0, ls, |alpha| {
            let u = base.u.axpy(alpha, block);
            let (report, grad) = action_and_gradient(&u, pot, op)?;
            let slope = grad.l2_dot(block);
            Ok(Some((report.total, slope, State { u, report, grad })))
        })?;
        if let Some(t) = trial {
            current = Some(t.payload);
        }
    }
    Ok(current)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    state: State,
    status: SolveStatus,
    iterations: usize,
    trace: Vec<TraceEntry>,
    seed: u64,
    line_search_failed: bool,
    notes: Vec<String>,
    pot: &dyn Potential,
    op: &DiffOperator,
) -> Result<SolveResult> {
    let (residual_inf, residual_l2) = pde_residual(&state.u, pot, op)?;
    let (mean, _) = mean_decompose(&state.u);
    let fluctuation_h1_norm = state.trace_entry(iterations).fluctuation_h1;
    Ok(SolveResult {
        u: state.u,
        status,
        iterations,
        action: state.report,
        residual_inf,
        residual_l2,
        mean,
        fluctuation_h1_norm,
        trace,
        seed,
        line_search_failed,
        notes,
    })
}

/// Damped Newton on `−Δ_h u + ∇F(t, u) = 0` with a preconditioned conjugate
/// gradient inner solve. Returns the input unchanged when its residual is
/// already within `tol`.
pub fn newton_krylov_refine(
    result: &SolveResult,
    pot: &dyn Potential,
    op: &DiffOperator,
    tol: f64,
) -> Result<SolveResult> {
    if !pot.has_hessian() {
        return Err(Error::HessianUnavailable);
    }
    if result.status == SolveStatus::DivergedNonCoercive {
        return Err(Error::InvalidOption(
            "cannot refine a diverged solve".into(),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidOption(
            "refinement tolerance must be positive".into(),
        ));
    }
    if result.residual_inf <= tol && result.action.grad_inf_norm <= tol {
        return Ok(result.clone());
    }

    let mut state = State::new(result.u.clone(), pot, op)?;
    let mut trace = result.trace.clone();
    let mut notes = result.notes.clone();
    let mut iterations = result.iterations;
    let ls = LineSearchParams {
        max_expansions: 0,
        ..LineSearchParams::default()
    };
    let mut converged = false;
    for _ in 0..50 {
        if state.report.grad_inf_norm <= tol {
            converged = true;
            break;
        }
        let hess = node_hessians(&state.u, pot);
        let mut rhs = state.grad.clone();
        rhs.scale(-1.0);
        let inner_tol = (0.1 * tol)
            .max(1e-3 * state.report.grad_inf_norm.min(1.0) * state.report.grad_inf_norm);
        let step = match conjugate_gradient(op, &hess, &rhs, inner_tol, 500)? {
            Some(step) => step,
            None => {
                notes.push("Newton inner solve broke down".into());
                break;
            }
        };
        let d0 = state.grad.l2_dot(&step);
        if !(d0 < 0.0) {
            notes.push("Newton step is not a descent direction".into());
            break;
        }
        let f0 = state.report.total;
        let trial = linesearch::search(f0, d0, 1.0, &ls, |alpha| {
            let u = state.u.axpy(alpha, &step);
            let (report, grad) = action_and_gradient(&u, pot, op)?;
            let slope = grad.l2_dot(&step);
            Ok(Some((report.total, slope, State { u, report, grad })))
        })?;
        let Some(trial) = trial else {
            notes.push("Newton line search failed".into());
            break;
        };
        state = trial.payload;
        iterations += 1;
        trace.push(state.trace_entry(iterations));
    }
    converged |= state.report.grad_inf_norm <= tol;
    let status = if converged {
        SolveStatus::Converged
    } else {
        notes.push(format!("Newton refinement did not reach tolerance {tol:e}"));
        SolveStatus::MaxIters
    };
    let line_search_failed = result.line_search_failed;
    finish(
        state,
        status,
        iterations,
        trace,
        result.seed,
        line_search_failed,
        notes,
        pot,
        op,
    )
}

fn node_hessians(u: &Field, pot: &dyn Potential) -> Vec<f64> {
    let grid = u.grid();
    let n = u.n();
    let mut out = vec![0.0; grid.node_count() * n * n];
    let mut t = vec![0.0; grid.p()];
    for (node, h) in out.chunks_mut(n * n).enumerate() {
        grid.coords_of(node, &mut t);
        pot.hessian(&t, u.at(node), h);
    }
    out
}

fn apply_jacobian(op: &DiffOperator, hess: &[f64], v: &Field) -> Result<Field> {
    let n = v.n();
    let mut out = op.laplacian(v)?;
    out.scale(-1.0);
    for (node, h) in hess.chunks(n * n).enumerate() {
        let x = v.at(node).to_vec();
        let o = &mut out.values_mut()[node * n..(node + 1) * n];
        for i in 0..n {
            o[i] += (0..n).map(|j| h[i * n + j] * x[j]).sum::<f64>();
        }
    }
    Ok(out)
}

/// Preconditioned CG for `(−Δ_h + ∇²F) x = b`. `None` signals breakdown.
fn conjugate_gradient(
    op: &DiffOperator,
    hess: &[f64],
    b: &Field,
    tol_inf: f64,
    max_iters: usize,
) -> Result<Option<Field>> {
    let mut x = Field::zeros(b.grid(), b.n());
    let mut r = b.clone();
    let mut z = op.precondition_h1(&r)?;
    let mut p = z.clone();
    let mut rz = r.l2_dot(&z);
    for _ in 0..max_iters {
        if r.max_abs() <= tol_inf {
            return Ok(Some(x));
        }
        let jp = apply_jacobian(op, hess, &p)?;
        let curvature = p.l2_dot(&jp);
        if !(curvature > 0.0) || !curvature.is_finite() {
            return Ok(None);
        }
        let alpha = rz / curvature;
        x.add_scaled(alpha, &p);
        r.add_scaled(-alpha, &jp);
        z = op.precondition_h1(&r)?;
        let rz_new = r.l2_dot(&z);
        let beta = rz_new / rz;
        rz = rz_new;
        let mut next = z.clone();
        next.add_scaled(beta, &p);
        p = next;
    }
    Ok(Some(x))
}

/// Writes `iter,action,grad_inf,mean_norm` rows.
pub fn write_trace_csv(trace: &[TraceEntry], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "iter,action,grad_inf,mean_norm")?;
    for e in trace {
        writeln!(
            out,
            "{},{:e},{:e},{:e}",
            e.iteration, e.action, e.grad_inf, e.mean_norm
        )?;
    }
    Ok(())
}
