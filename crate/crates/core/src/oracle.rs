//! Brute-force references: dense linear solves for quadratic potentials and
//! finite-difference derivatives of the discrete action.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Field, TorusGrid};
use crate::operators::{action_value, DiffOperator};
use crate::potential::Potential;

/// Largest `M·n` accepted by [`assemble_quadratic_system`].
pub const DENSE_CAP: usize = 20_000;

/// Largest `M·n` for which [`fd_action_gradient`] differences every
/// coordinate.
pub const FULL_FD_CAP: usize = 5_000;

/// Number of random directions probed above [`FULL_FD_CAP`].
pub const FD_DIRECTIONS: usize = 20;

/// `matrix · U = rhs` in node-major, component-fastest ordering.
#[derive(Debug, Clone)]
pub struct DenseSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

impl DenseSystem {
    pub fn size(&self) -> usize {
        self.rhs.len()
    }

    /// `max |A_ij − A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let m = &self.matrix;
        (m - m.transpose()).amax()
    }
}

/// The negative Laplacian as a dense `M × M` matrix, one column per unit
/// field.
pub fn negative_laplacian_matrix(op: &DiffOperator) -> Result<DMatrix<f64>> {
    let grid = op.grid();
    let m = grid.node_count();
    if m > DENSE_CAP {
        return Err(Error::TooLarge {
            size: m,
            cap: DENSE_CAP,
        });
    }
    let columns: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|j| {
            let mut e = Field::zeros(grid, 1);
            e.values_mut()[j] = 1.0;
            op.laplacian(&e)
                .map(|l| l.values().iter().map(|v| -v).collect())
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(m, m, |i, j| columns[j][i]))
}

/// `(−Δ_h + blockdiag A) U = −g` for `F = ½⟨Ax,x⟩ + ⟨g(t),x⟩`.
pub fn assemble_quadratic_system(
    grid: &Arc<TorusGrid>,
    op: &DiffOperator,
    a: &[f64],
    g: &Field,
) -> Result<DenseSystem> {
    if **op.grid() != **grid || **g.grid() != **grid {
        return Err(Error::GridMismatch);
    }
    let n = g.n();
    if a.len() != n * n {
        return Err(Error::LengthMismatch {
            what: "quadratic form matrix",
            expected: n * n,
            got: a.len(),
        });
    }
    let m = grid.node_count();
    let size = m * n;
    if size > DENSE_CAP {
        return Err(Error::TooLarge {
            size,
            cap: DENSE_CAP,
        });
    }
    let lap = negative_laplacian_matrix(op)?;
    let mut matrix = DMatrix::zeros(size, size);
    for row in 0..m {
        for col in 0..m {
            let v = lap[(row, col)];
            if v != 0.0 {
                for i in 0..n {
                    matrix[(row * n + i, col * n + i)] = v;
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                matrix[(row * n + i, row * n + j)] += a[i * n + j];
            }
        }
    }
    let rhs = DVector::from_iterator(size, g.values().iter().map(|v| -v));
    Ok(DenseSystem { matrix, rhs })
}

/// Cholesky solve; a failed factorization means the matrix is not positive
/// definite. Pivots at round-off level relative to the diagonal count as
/// failures, so exactly singular matrices are reported rather than solved.
pub fn dense_solve(system: &DenseSystem) -> Result<Vec<f64>> {
    let chol = system.matrix.clone().cholesky().ok_or_else(|| {
        Error::NotPositiveDefinite("dense system has no Cholesky factorization".into())
    })?;
    let size = system.size();
    let max_diag = system.matrix.diagonal().amax();
    let min_pivot = chol
        .l_dirty()
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |m, v| m.min(v * v));
    if min_pivot <= f64::EPSILON * size as f64 * max_diag {
        return Err(Error::NotPositiveDefinite(format!(
            "pivot {min_pivot:e} is at round-off level"
        )));
    }
    let x = chol.solve(&system.rhs);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("dense solution".into()));
    }
    Ok(x.iter().copied().collect())
}

/// Solves the dense system for a quadratic potential and wraps the result as
/// a field.
pub fn dense_quadratic_solution(op: &DiffOperator, a: &[f64], g: &Field) -> Result<Field> {
    let system = assemble_quadratic_system(op.grid(), op, a, g)?;
    Field::from_values(op.grid(), g.n(), dense_solve(&system)?)
}

/// A directional derivative `dφ(u)[v]` estimated by central differences.
#[derive(Debug, Clone)]
pub struct DirectionalDerivative {
    pub direction: Field,
    pub derivative: f64,
}

#[derive(Debug, Clone)]
pub enum FdGradient {
    /// Every coordinate differenced and divided by the cell weight, so it is
    /// directly comparable with the L² action gradient.
    Full(Field),
    /// Seeded random directions, used above [`FULL_FD_CAP`].
    Directional(Vec<DirectionalDerivative>),
}

impl FdGradient {
    pub fn full(&self) -> Option<&Field> {
        match self {
            FdGradient::Full(f) => Some(f),
            FdGradient::Directional(_) => None,
        }
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(1e-8..=1e-3).contains(&epsilon) {
        return Err(Error::InvalidOption(format!(
            "epsilon {epsilon} outside [1e-8, 1e-3]"
        )));
    }
    Ok(())
}

/// `(φ(u + εv) − φ(u − εv)) / 2ε`.
pub fn fd_directional(
    u: &Field,
    v: &Field,
    pot: &dyn Potential,
    op: &DiffOperator,
    epsilon: f64,
) -> Result<f64> {
    check_epsilon(epsilon)?;
    u.same_shape(v)?;
    let plus = action_value(&u.axpy(epsilon, v), pot, op)?;
    let minus = action_value(&u.axpy(-epsilon, v), pot, op)?;
    Ok((plus - minus) / (2.0 * epsilon))
}

pub fn fd_action_gradient(
    u: &Field,
    pot: &dyn Potential,
    op: &DiffOperator,
    epsilon: f64,
) -> Result<FdGradient> {
    fd_action_gradient_seeded(u, pot, op, epsilon, 0)
}

pub fn fd_action_gradient_seeded(
    u: &Field,
    pot: &dyn Potential,
    op: &DiffOperator,
    epsilon: f64,
    seed: u64,
) -> Result<FdGradient> {
    check_epsilon(epsilon)?;
    let size = u.values().len();
    if size > FULL_FD_CAP {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(FD_DIRECTIONS);
        for _ in 0..FD_DIRECTIONS {
            let direction = Field::from_fn(u.grid(), u.n(), |_, o| {
                o.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0))
            });
            let derivative = fd_directional(u, &direction, pot, op, epsilon)?;
            out.push(DirectionalDerivative {
                direction,
                derivative,
            });
        }
        return Ok(FdGradient::Directional(out));
    }
    let w = u.grid().cell_weight();
    let values: Vec<f64> = (0..size)
        .into_par_iter()
        .map(|k| {
            let mut up = u.clone();
            up.values_mut()[k] += epsilon;
            let mut um = u.clone();
            um.values_mut()[k] -= epsilon;
            let d = action_value(&up, pot, op)? - action_value(&um, pot, op)?;
            Ok(d / (2.0 * epsilon * w))
        })
        .collect::<Result<_>>()?;
    Ok(FdGradient::Full(Field::from_values(
        u.grid(),
        u.n(),
        values,
    )?))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::minimizer::{solve, SolverOptions};
    use crate::operators::{action_gradient, Scheme};
    use crate::potential::{
        make_linear_drift, make_manufactured, make_quadratic_shift, TrigSeries,
    };

    fn grid1(n: usize) -> Arc<TorusGrid> {
        TorusGrid::shared(1, &[2.0 * PI], &[n]).unwrap()
    }

    #[test]
    fn zero_forcing_gives_zero() {
        let g = grid1(4);
        let op = DiffOperator::new(&g, Scheme::Spectral);
        let u = dense_quadratic_solution(&op, &[1.0], &Field::zeros(&g, 1)).unwrap();
        assert_eq!(u.max_abs(), 0.0);
    }

    #[test]
    fn identity_system_returns_rhs() {
        let sys = DenseSystem {
            matrix: DMatrix::identity(5, 5),
            rhs: DVector::from_vec(vec![1.0, -2.0, 3.0, 0.5, 0.0]),
        };
        assert_eq!(dense_solve(&sys).unwrap(), vec![1.0, -2.0, 3.0, 0.5, 0.0]);
    }

    #[test]
    fn pure_laplacian_is_singular() {
        let g = grid1(8);
        for scheme in [Scheme::Spectral, Scheme::Fd2] {
            let op = DiffOperator::new(&g, scheme);
            let sys = assemble_quadratic_system(&g, &op, &[0.0], &Field::zeros(&g, 1)).unwrap();
            assert!(matches!(
                dense_solve(&sys),
                Err(Error::NotPositiveDefinite(_))
            ));
        }
    }

    #[test]
    fn manufactured_sine_matches_dense_and_minimizer() {
        let g = grid1(8);
        let op = DiffOperator::new(&g, Scheme::Spectral);
        let target = TrigSeries::zero(1).sin(&[1], &[-1.0]);
        let (pot, exact) = make_manufactured(&g, 1, &target).unwrap();
        let q = pot.as_quadratic(&g).unwrap();
        // g = −(k²+1)·(−sin t) = 2 sin t
        let expected_g = Field::from_fn(&g, 1, |t, o| o[0] = 2.0 * t[0].sin());
        assert!(q.g.max_diff(&expected_g) < 1e-14);
        let dense = dense_quadratic_solution(&op, &q.a, &q.g).unwrap();
        assert!(dense.max_diff(&exact) < 1e-12);
        let r = solve(&g, &pot, &op, &SolverOptions::default(), None).unwrap();
        assert!(r.u.max_diff(&dense) < 1e-8);
    }

    #[test]
    fn assembled_matrix_is_symmetric_with_zero_row_sums() {
        let g = TorusGrid::shared(2, &[2.0 * PI, 3.0], &[6, 4]).unwrap();
        for scheme in [Scheme::Spectral, Scheme::Fd2] {
            let op = DiffOperator::new(&g, scheme);
            let lap = negative_laplacian_matrix(&op).unwrap();
            assert!((&lap - lap.transpose()).amax() <= 1e-12);
            for r in 0..lap.nrows() {
                assert!(lap.row(r).sum().abs() <= 1e-12);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            let gf = Field::from_fn(&g, 2, |_, o| {
                o.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0))
            });
            let sys = assemble_quadratic_system(&g, &op, &[2.0, 0.5, 0.5, 1.0], &gf).unwrap();
            assert!(sys.asymmetry() <= 1e-12);
            let x = dense_solve(&sys).unwrap();
            let res = (&sys.matrix * DVector::from_vec(x) - &sys.rhs).amax();
            assert!(res <= 1e-10 * (1.0 + sys.rhs.amax()));
        }
    }

    #[test]
    fn cap_is_enforced() {
        let g = TorusGrid::shared(2, &[1.0, 1.0], &[150, 150]).unwrap();
        let op = DiffOperator::new(&g, Scheme::Fd2);
        let r = assemble_quadratic_system(&g, &op, &[1.0], &Field::zeros(&g, 1));
        assert!(matches!(r, Err(Error::TooLarge { .. })));
    }

    #[test]
    fn fd_gradient_matches_analytic_gradient() {
        let g = grid1(16);
        let op = DiffOperator::new(&g, Scheme::Spectral);
        let c = TrigSeries::zero(1)
            .cos(&[2], &[0.7])
            .bind(g.periods())
            .unwrap();
        let pot = make_quadratic_shift(1, c).unwrap();
        let u = Field::from_fn(&g, 1, |t, o| o[0] = (t[0]).sin() + 0.3 * (3.0 * t[0]).cos());
        let fd = fd_action_gradient(&u, &pot, &op, 1e-6).unwrap();
        let fd = fd.full().unwrap();
        let exact = action_gradient(&u, &pot, &op).unwrap();
        assert!(fd.max_diff(&exact) <= 1e-5 * exact.max_abs().max(1.0));
    }

    #[test]
    fn free_field_gradient_is_negative_laplacian() {
        let g = grid1(16);
        let op = DiffOperator::new(&g, Scheme::Spectral);
        let zero = make_linear_drift(1, TrigSeries::zero(1).bind(g.periods()).unwrap()).unwrap();
        let u = Field::from_fn(&g, 1, |t, o| o[0] = t[0].sin());
        let fd = fd_action_gradient(&u, &zero, &op, 1e-6).unwrap();
        assert!(fd.full().unwrap().max_diff(&u) <= 1e-5);
    }

    #[test]
    fn fd_gradient_vanishes_at_the_solution() {
        let g = grid1(16);
        let op = DiffOperator::new(&g, Scheme::Fd2);
        let (pot, _) = make_manufactured(&g, 1, &TrigSeries::zero(1).cos(&[1], &[1.0])).unwrap();
        let q = pot.as_quadratic(&g).unwrap();
        let u = dense_quadratic_solution(&op, &q.a, &q.g).unwrap();
        let fd = fd_action_gradient(&u, &pot, &op, 1e-6).unwrap();
        assert!(fd.full().unwrap().max_abs() <= 1e-5);
    }

    #[test]
    fn large_fields_fall_back_to_directions() {
        let g = TorusGrid::shared(2, &[1.0, 1.0], &[64, 64]).unwrap();
        let op = DiffOperator::new(&g, Scheme::Spectral);
        let pot = make_quadratic_shift(2, TrigSeries::zero(2).bind(g.periods()).unwrap()).unwrap();
        let u = Field::from_fn(&g, 2, |t, o| {
            o[0] = (2.0 * PI * t[0]).sin();
            o[1] = (2.0 * PI * t[1]).cos();
        });
        let FdGradient::Directional(dirs) = fd_action_gradient(&u, &pot, &op, 1e-6).unwrap() else {
            panic!("expected directional estimates");
        };
        assert_eq!(dirs.len(), FD_DIRECTIONS);
        let grad = action_gradient(&u, &pot, &op).unwrap();
        for d in &dirs {
            let exact = grad.l2_dot(&d.direction);
            assert!((d.derivative - exact).abs() <= 1e-5 * exact.abs().max(1.0));
        }
    }

    #[test]
    fn epsilon_range_is_checked() {
        let g = grid1(4);
        let op = DiffOperator::new(&g, Scheme::Spectral);
        let pot = make_quadratic_shift(1, TrigSeries::zero(1).bind(g.periods()).unwrap()).unwrap();
        let u = Field::zeros(&g, 1);
        assert!(fd_action_gradient(&u, &pot, &op, 1e-2).is_err());
        assert!(fd_action_gradient(&u, &pot, &op, 1e-9).is_err());
    }
}
