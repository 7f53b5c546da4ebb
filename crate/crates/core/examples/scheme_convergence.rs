//! Error decay under grid refinement: second order for finite differences,
//! round-off level for the spectral scheme.

use torus_action::minimizer::{solve, SolverOptions};
use torus_action::potential::make_manufactured;
use torus_action::{DiffOperator, Scheme, TorusGrid, TrigSeries};

fn main() -> torus_action::Result<()> {
    let target = TrigSeries::zero(1).cos(&[1], &[1.0]).sin(&[3], &[0.25]);
    for scheme in [Scheme::Fd2, Scheme::Spectral] {
        let mut prev: Option<f64> = None;
        for n in [8, 16, 32, 64] {
            let grid = TorusGrid::shared(1, &[2.0 * std::f64::consts::PI], &[n])?;
            let (pot, exact) = make_manufactured(&grid, 1, &target)?;
            let op = DiffOperator::new(&grid, scheme);
            let opts = SolverOptions {
                tol_grad_inf: 1e-12,
                ..SolverOptions::default()
            };
            let err = solve(&grid, &pot, &op, &opts, None)?.u.max_diff(&exact);
            match prev {
                Some(p) => println!("{scheme:?} N = {n}: error {err:.3e}, ratio {:.2}", p / err),
                None => println!("{scheme:?} N = {n}: error {err:.3e}"),
            }
            prev = Some(err);
        }
    }
    Ok(())
}
