//! Polishing a rough descent result with Newton-Krylov steps.

use std::f64::consts::PI;

use torus_action::minimizer::{newton_krylov_refine, solve, Method, SolverOptions};
use torus_action::potential::make_log_sum_exp;
use torus_action::{DiffOperator, Scheme, TorusGrid, TrigSeries};

fn main() -> torus_action::Result<()> {
    let grid = TorusGrid::shared(2, &[2.0 * PI, 2.0], &[32, 16])?;
    let c = TrigSeries::zero(2)
        .cos(&[1, 1], &[1.0, -0.5])
        .sin(&[2, 0], &[0.2, 0.7]);
    let pot = make_log_sum_exp(2, c.bind(grid.periods())?, vec![0.3, -0.2])?;
    let op = DiffOperator::new(&grid, Scheme::Fd2);

    let rough = SolverOptions {
        method: Method::GradientDescent,
        max_iters: 50,
        ..SolverOptions::default()
    };
    let r = solve(&grid, &pot, &op, &rough, None)?;
    println!(
        "after {} descent steps: {:?}, residual {:.2e}",
        r.iterations, r.status, r.residual_inf
    );
    let polished = newton_krylov_refine(&r, &pot, &op, 1e-12)?;
    println!(
        "after polishing: {:?}, residual {:.2e}",
        polished.status, polished.residual_inf
    );
    Ok(())
}
