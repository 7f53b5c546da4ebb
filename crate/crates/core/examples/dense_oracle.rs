//! Cross-checking the minimizer against a dense direct solve.

use std::f64::consts::PI;

use torus_action::minimizer::{solve, SolverOptions};
use torus_action::operators::action_gradient;
use torus_action::oracle::{dense_quadratic_solution, fd_action_gradient};
use torus_action::potential::make_quadratic_form;
use torus_action::{DiffOperator, Field, Scheme, TorusGrid, TrigSeries};

fn main() -> torus_action::Result<()> {
    let grid = TorusGrid::shared(2, &[2.0 * PI, 3.0], &[12, 10])?;
    let g = TrigSeries::zero(2)
        .cos(&[1, 0], &[1.0, -1.0])
        .sin(&[2, 1], &[0.5, 0.25]);
    let pot = make_quadratic_form(&[2.0, 0.5, 0.5, 1.0], g.bind(grid.periods())?)?;
    let q = pot.as_quadratic(&grid).expect("quadratic");

    for scheme in [Scheme::Spectral, Scheme::Fd2] {
        let op = DiffOperator::new(&grid, scheme);
        let dense = dense_quadratic_solution(&op, &q.a, &q.g)?;
        let opts = SolverOptions {
            tol_grad_inf: 1e-11,
            ..SolverOptions::default()
        };
        let r = solve(&grid, &pot, &op, &opts, None)?;
        let u = Field::from_fn(&grid, 2, |t, out| {
            out[0] = t[0].sin();
            out[1] = (t[1]).cos();
        });
        let fd = fd_action_gradient(&u, &pot, &op, 1e-6)?;
        let exact = action_gradient(&u, &pot, &op)?;
        println!(
            "{scheme:?}: dense vs minimizer {:.2e}, finite-difference gradient error {:.2e}",
            r.u.max_diff(&dense),
            fd.full().expect("small problem").max_diff(&exact)
        );
    }
    Ok(())
}
