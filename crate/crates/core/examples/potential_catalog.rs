//! The potential catalog, JSON specs and the sampled gradient/convexity checks.

use std::f64::consts::PI;

use torus_action::potential::{check_convexity, check_gradient, make_log_sum_exp};
use torus_action::{Potential, PotentialSpec, TorusGrid, TrigSeries};

fn main() -> torus_action::Result<()> {
    let grid = TorusGrid::shared(1, &[2.0 * PI], &[32])?;

    let spec: PotentialSpec = serde_json::from_str(
        r#"{"kind": "quadratic_shift", "c": {"n": 2, "terms": [{"freq": [1], "cos": [1.0, 0.0], "sin": [0.0, 1.0]}]}}"#,
    )
    .expect("valid spec");
    let (shift, _) = spec.build(&grid)?;
    let t = [0.4];
    let x = [1.0, -0.5];
    let mut g = [0.0; 2];
    shift.gradient(&t, &x, &mut g);
    println!(
        "quadratic shift: F = {:.6}  grad = {:?}  {:?}",
        shift.value(&t, &x),
        g,
        shift.convexity()
    );
    println!("  envelope: {}", shift.metadata());

    let c = TrigSeries::zero(2)
        .cos(&[1], &[0.5, -0.5])
        .bind(grid.periods())?;
    let lse = make_log_sum_exp(2, c, vec![0.1, 0.0])?;
    // far from the origin the naive formula would overflow
    println!(
        "log-sum-exp at x = (800, -800): {:.6}",
        lse.value(&t, &[800.0, -800.0])
    );

    for (name, pot) in [
        ("quadratic shift", &shift as &dyn Potential),
        ("log-sum-exp", &lse),
    ] {
        println!(
            "{name}: gradient error {:.2e}, worst midpoint gap {:.2e}",
            check_gradient(pot, grid.periods(), 100, 1),
            check_convexity(pot, grid.periods(), 1000, 1)
        );
    }
    Ok(())
}
