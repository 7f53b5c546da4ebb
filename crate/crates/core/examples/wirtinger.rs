//! The discrete Wirtinger constant and an audit over random fields.

use std::f64::consts::PI;

use torus_action::certificate::{
    lowest_harmonic, wirtinger_audit, wirtinger_constant, wirtinger_ratio,
};
use torus_action::{DiffOperator, Scheme, TorusGrid};

fn main() -> torus_action::Result<()> {
    let grids = [
        TorusGrid::shared(1, &[2.0 * PI], &[64])?,
        TorusGrid::shared(2, &[2.0 * PI, 4.0 * PI], &[16, 32])?,
        TorusGrid::shared(3, &[1.0, 2.0, 3.0], &[8, 8, 12])?,
    ];
    for grid in &grids {
        for scheme in [Scheme::Spectral, Scheme::Fd2] {
            let op = DiffOperator::new(grid, scheme);
            let c = wirtinger_constant(&op);
            let worst = wirtinger_audit(&op, 100, 0)?;
            let extremal = wirtinger_ratio(&op, &lowest_harmonic(&op))?.unwrap_or(0.0);
            println!("p = {} {scheme:?}: C = {c:.6}, worst random ratio {worst:.6}, extremal {extremal:.6}", grid.p());
        }
    }
    Ok(())
}
