//! Deciding solvability from the mean potential before solving.

use std::f64::consts::PI;

use torus_action::certificate::{certify, CertifyOptions};
use torus_action::minimizer::{solve, SolverOptions};
use torus_action::potential::{make_linear_drift, make_log_sum_exp};
use torus_action::{DiffOperator, Potential, Scheme, TorusGrid, TrigSeries};

fn main() -> torus_action::Result<()> {
    let grid = TorusGrid::shared(1, &[2.0 * PI], &[32])?;
    let op = DiffOperator::new(&grid, Scheme::Spectral);
    let lse = make_log_sum_exp(
        1,
        TrigSeries::zero(1).cos(&[1], &[1.0]).bind(grid.periods())?,
        vec![0.5],
    )?;
    let drift = make_linear_drift(
        1,
        TrigSeries::constant(&[1.0])
            .cos(&[2], &[0.5])
            .bind(grid.periods())?,
    )?;
    let wave = make_linear_drift(
        1,
        TrigSeries::zero(1).sin(&[1], &[1.0]).bind(grid.periods())?,
    )?;

    let cases: [(&str, &dyn Potential); 3] = [
        ("log-sum-exp", &lse),
        ("drift 1 + cos 2t", &drift),
        ("drift sin t", &wave),
    ];
    for (name, pot) in cases {
        let cert = certify(&grid, pot, &op, &CertifyOptions::default())?;
        let run = solve(&grid, pot, &op, &SolverOptions::default(), None)?;
        println!(
            "{name}: verdict {:?}, x̄ = {:?}, coercivity {:?}; solver says {:?}",
            cert.verdict, cert.x_bar, cert.coercivity, run.status
        );
        for note in &cert.notes {
            println!("  note: {note}");
        }
    }
    Ok(())
}
