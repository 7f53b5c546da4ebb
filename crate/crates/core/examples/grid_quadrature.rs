//! Building a periodic grid, indexing nodes and integrating samples.

use std::f64::consts::PI;

use torus_action::{Field, MultiIndex, TorusGrid};

fn main() -> torus_action::Result<()> {
    let grid = TorusGrid::shared(2, &[2.0 * PI, 3.0], &[16, 12])?;
    println!(
        "nodes: {}  cell weight: {:.6}  volume: {:.6}",
        grid.node_count(),
        grid.cell_weight(),
        grid.volume()
    );

    let idx = MultiIndex(vec![3, 7]);
    let node = grid.flatten(&idx)?;
    println!(
        "node {:?} -> {node} -> {:?} at t = {:?}",
        idx.0,
        grid.unflatten(node)?.0,
        grid.node_coords(&idx)?
    );

    // the periodic trapezoid rule is exact for resolvable trig polynomials
    let f = Field::from_fn(&grid, 1, |t, out| {
        out[0] = 1.0
            + (t[0]).cos().powi(2) * (2.0 * PI * t[1] / 3.0).sin()
            + (t[0] + 2.0 * PI * t[1] / 3.0).cos().powi(2)
    });
    let integral = grid.integrate(f.values())?;
    let exact = grid.volume() * 1.5;
    println!(
        "integral = {integral:.15}  exact = {exact:.15}  diff = {:.1e}",
        (integral - exact).abs()
    );
    Ok(())
}
