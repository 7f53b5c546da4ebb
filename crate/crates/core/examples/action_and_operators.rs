//! Partials, Laplacians, the action and its gradient under both schemes.

use std::f64::consts::PI;

use torus_action::operators::{
    action_and_gradient, face_periodicity_audit, h1_norm, partials, pde_residual,
};
use torus_action::potential::make_quadratic_shift;
use torus_action::{DiffOperator, Field, Scheme, TorusGrid, TrigSeries};

fn main() -> torus_action::Result<()> {
    let grid = TorusGrid::shared(1, &[2.0 * PI], &[16])?;
    let u = Field::from_fn(&grid, 1, |t, out| out[0] = t[0].sin());
    let pot = make_quadratic_shift(1, TrigSeries::zero(1).bind(grid.periods())?)?;

    for scheme in [Scheme::Spectral, Scheme::Fd2] {
        let op = DiffOperator::new(&grid, scheme);
        let du = partials(&op, &u)?;
        let lap = op.laplacian(&u)?;
        let (report, grad) = action_and_gradient(&u, &pot, &op)?;
        let (res_inf, _) = pde_residual(&u, &pot, &op)?;
        println!(
            "{scheme:?}: u'(0) = {:.6}  Δu(π/2) = {:.6}  |u|_H1 = {:.6}  action = {:.6}  |grad| = {:.6}  residual = {:.6}",
            du.get(0, 0, 0),
            lap.values()[4],
            h1_norm(&u, &op)?,
            report.total,
            grad.max_abs(),
            res_inf
        );
    }
    println!(
        "face periodicity defect: {:.1e}",
        face_periodicity_audit(&u, 0)?
    );
    Ok(())
}
