//! Solving a manufactured problem with a known exact solution.

use std::f64::consts::PI;
use std::time::Instant;

use torus_action::minimizer::{solve, Method, SolverOptions};
use torus_action::potential::make_manufactured;
use torus_action::{DiffOperator, Scheme, TorusGrid, TrigSeries};

fn main() -> torus_action::Result<()> {
    let grid = TorusGrid::shared(2, &[2.0 * PI, 2.0 * PI], &[32, 32])?;
    let target = TrigSeries::zero(2)
        .cos(&[1, 0], &[1.0, 0.0])
        .sin(&[1, 2], &[0.3, -0.4])
        .cos(&[0, 3], &[0.0, 0.8]);
    let (pot, exact) = make_manufactured(&grid, 2, &target)?;
    let op = DiffOperator::new(&grid, Scheme::Spectral);

    for method in [Method::GradientDescent, Method::NonlinearCg, Method::Lbfgs] {
        let opts = SolverOptions {
            method,
            tol_grad_inf: 1e-10,
            ..SolverOptions::default()
        };
        let start = Instant::now();
        let r = solve(&grid, &pot, &op, &opts, None)?;
        println!(
            "{method:?}: {:?} in {} iterations ({:.3}s), error {:.2e}, residual {:.2e}",
            r.status,
            r.iterations,
            start.elapsed().as_secs_f64(),
            r.u.max_diff(&exact),
            r.residual_inf
        );
    }
    Ok(())
}
