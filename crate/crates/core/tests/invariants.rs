use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use torus_action::minimizer::{newton_krylov_refine, solve, Method, SolveStatus, SolverOptions};
use torus_action::operators::{
    action_gradient, action_value, h1_norm, line_probe, mean_decompose, mean_force, pde_residual,
    weak_pairing,
};
use torus_action::oracle::{dense_quadratic_solution, fd_directional};
use torus_action::potential::{
    make_linear_drift, make_log_sum_exp, make_manufactured, make_quadratic_form,
    make_quadratic_shift,
};
use torus_action::{
    CatalogPotential, DiffOperator, Field, Potential, Scheme, TorusGrid, TrigSeries,
};

const TWO_PI: f64 = 2.0 * PI;

fn grid2() -> Arc<TorusGrid> {
    TorusGrid::shared(2, &[TWO_PI, 3.0], &[12, 8]).unwrap()
}

fn lse(grid: &Arc<TorusGrid>) -> CatalogPotential {
    let c = TrigSeries::zero(2)
        .cos(&[1, 1], &[1.0, -0.5])
        .sin(&[0, 1], &[0.2, 0.6]);
    make_log_sum_exp(2, c.bind(grid.periods()).unwrap(), vec![0.3, -0.1]).unwrap()
}

fn random_field(grid: &Arc<TorusGrid>, n: usize, amp: f64, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Field::from_fn(grid, n, |_, o| {
        o.iter_mut().for_each(|x| *x = rng.random_range(-amp..amp))
    })
}

#[test]
fn strictly_convex_solutions_do_not_depend_on_the_seed() {
    let grid = grid2();
    let pot = lse(&grid);
    for scheme in [Scheme::Spectral, Scheme::Fd2] {
        let op = DiffOperator::new(&grid, scheme);
        let solve_seed = |seed| {
            let opts = SolverOptions {
                seed,
                ..SolverOptions::default()
            };
            solve(&grid, &pot, &op, &opts, None).unwrap()
        };
        let (a, b) = (solve_seed(1), solve_seed(2));
        assert_eq!(a.status, SolveStatus::Converged);
        assert!(a.u.max_diff(&b.u) <= 1e-6);
    }
}

#[test]
fn every_method_reaches_the_dense_solution() {
    let grid = grid2();
    let g = TrigSeries::zero(2)
        .cos(&[2, 1], &[1.0, 0.3])
        .cos(&[], &[0.5, -0.5]);
    let pot = make_quadratic_form(&[1.5, 0.2, 0.2, 0.7], g.bind(grid.periods()).unwrap()).unwrap();
    let q = pot.as_quadratic(&grid).unwrap();
    for scheme in [Scheme::Spectral, Scheme::Fd2] {
        let op = DiffOperator::new(&grid, scheme);
        let dense = dense_quadratic_solution(&op, &q.a, &q.g).unwrap();
        for method in [Method::GradientDescent, Method::NonlinearCg, Method::Lbfgs] {
            for precondition_h1 in [true, false] {
                let opts = SolverOptions {
                    method,
                    precondition_h1,
                    tol_grad_inf: 1e-10,
                    max_iters: 50_000,
                    ..SolverOptions::default()
                };
                let r = solve(&grid, &pot, &op, &opts, None).unwrap();
                assert_eq!(
                    r.status,
                    SolveStatus::Converged,
                    "{method:?} {precondition_h1}"
                );
                assert!(
                    r.u.max_diff(&dense) <= 1e-8,
                    "{method:?} {precondition_h1} {:e}",
                    r.u.max_diff(&dense)
                );
            }
        }
    }
}

#[test]
fn stationary_point_annihilates_every_direction() {
    let grid = grid2();
    let pot = lse(&grid);
    let op = DiffOperator::new(&grid, Scheme::Fd2);
    let opts = SolverOptions {
        tol_grad_inf: 1e-11,
        ..SolverOptions::default()
    };
    let r = solve(&grid, &pot, &op, &opts, None).unwrap();
    for seed in 0..20 {
        let v = random_field(&grid, 2, 1.0, seed);
        let pairing = weak_pairing(&r.u, &v, &pot, &op).unwrap();
        assert!(pairing.abs() <= 1e-8 * v.l2_norm(), "{pairing:e}");
    }
    let force = mean_force(&r.u, &pot).unwrap();
    assert!(force.iter().all(|f| f.abs() <= 1e-8 * grid.volume()));
}

#[test]
fn mean_mode_decouples_for_constant_fields() {
    let grid = grid2();
    let pot = lse(&grid);
    let x = [0.7, -1.2];
    let u = Field::constant(&grid, &x);
    for scheme in [Scheme::Spectral, Scheme::Fd2] {
        let op = DiffOperator::new(&grid, scheme);
        let g = action_gradient(&u, &pot, &op).unwrap();
        let sampled = Field::from_fn(&grid, 2, |t, out| pot.gradient(t, &x, out));
        assert!(g.max_diff(&sampled) <= 1e-12);
        assert!(op.laplacian(&u).unwrap().max_abs() <= 1e-12);
    }
}

#[test]
fn refine_reaches_round_off_from_a_rough_start() {
    let grid = TorusGrid::shared(1, &[TWO_PI], &[32]).unwrap();
    let target = TrigSeries::zero(1).cos(&[1], &[1.0]).sin(&[2], &[0.5]);
    let (pot, exact) = make_manufactured(&grid, 1, &target).unwrap();
    let op = DiffOperator::new(&grid, Scheme::Spectral);
    let rough = SolverOptions {
        method: Method::GradientDescent,
        precondition_h1: false,
        max_iters: 50,
        ..SolverOptions::default()
    };
    let r = solve(&grid, &pot, &op, &rough, None).unwrap();
    let polished = newton_krylov_refine(&r, &pot, &op, 1e-12).unwrap();
    assert!(polished.residual_inf <= 1e-12);
    assert!(polished.u.max_diff(&exact) <= 1e-10);
}

#[test]
fn drift_diverges_with_bounded_fluctuation() {
    let grid = TorusGrid::shared(1, &[TWO_PI], &[32]).unwrap();
    let a = TrigSeries::constant(&[1.0]).cos(&[1], &[2.0]);
    let pot = make_linear_drift(1, a.bind(grid.periods()).unwrap()).unwrap();
    for scheme in [Scheme::Spectral, Scheme::Fd2] {
        let op = DiffOperator::new(&grid, scheme);
        let r = solve(&grid, &pot, &op, &SolverOptions::default(), None).unwrap();
        assert_eq!(r.status, SolveStatus::DivergedNonCoercive);
        assert!(r.mean[0] <= -1e6);
        // the fluctuation solves −ũ'' = −2 cos t, so ‖ũ‖_H1 = 2·√π·√2
        assert!(r.fluctuation_h1_norm <= 10.0, "{}", r.fluctuation_h1_norm);
        let (_, fluct) = mean_decompose(&r.u);
        assert!(h1_norm(&fluct, &op).unwrap() <= 10.0);
    }
}

#[test]
fn residual_of_exact_manufactured_solution_is_round_off() {
    let grid = grid2();
    let target = TrigSeries::zero(2)
        .cos(&[1, 2], &[1.0, 0.5])
        .sin(&[3, 0], &[-0.2, 0.1]);
    let (pot, exact) = make_manufactured(&grid, 2, &target).unwrap();
    let op = DiffOperator::new(&grid, Scheme::Spectral);
    let (inf, l2) = pde_residual(&exact, &pot, &op).unwrap();
    assert!(inf <= 1e-12 && l2 <= 1e-12);
}

fn catalog(grid: &Arc<TorusGrid>, which: u8) -> CatalogPotential {
    let c = TrigSeries::zero(2)
        .cos(&[1, 0], &[0.5, 1.0])
        .sin(&[1, 1], &[0.3, -0.2]);
    let c = c.bind(grid.periods()).unwrap();
    match which {
        0 => make_quadratic_shift(2, c).unwrap(),
        1 => make_quadratic_form(&[2.0, 0.3, 0.3, 1.0], c).unwrap(),
        2 => make_log_sum_exp(2, c, vec![0.1, 0.2]).unwrap(),
        _ => make_linear_drift(2, c).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gradient_matches_directional_differences(seed in 0u64..10_000, which in 0u8..4, fd2 in any::<bool>()) {
        let grid = grid2();
        let pot = catalog(&grid, which);
        let op = DiffOperator::new(&grid, if fd2 { Scheme::Fd2 } else { Scheme::Spectral });
        let u = random_field(&grid, 2, 2.0, seed);
        let v = random_field(&grid, 2, 1.0, seed + 1);
        let exact = action_gradient(&u, &pot, &op).unwrap().l2_dot(&v);
        let fd = fd_directional(&u, &v, &pot, &op, 1e-6).unwrap();
        prop_assert!((fd - exact).abs() <= 1e-5 * exact.abs().max(1.0));
    }

    #[test]
    fn action_is_convex_along_lines(seed in 0u64..10_000, which in 0u8..4, fd2 in any::<bool>()) {
        let grid = grid2();
        let pot = catalog(&grid, which);
        let op = DiffOperator::new(&grid, if fd2 { Scheme::Fd2 } else { Scheme::Spectral });
        let u = random_field(&grid, 2, 2.0, seed);
        let v = random_field(&grid, 2, 2.0, seed + 7);
        let vals = line_probe(&u, &v, &pot, &op, &[-1.0, 0.0, 1.0]).unwrap();
        prop_assert!(vals[1] <= 0.5 * (vals[0] + vals[2]) + 1e-10);
    }

    #[test]
    fn action_is_invariant_under_translation_by_a_period(seed in 0u64..10_000, shift in 0usize..12) {
        // shifting samples by whole nodes along axis 0 is a time translation
        let grid = grid2();
        let pot = make_quadratic_shift(2, TrigSeries::zero(2).bind(grid.periods()).unwrap()).unwrap();
        let op = DiffOperator::new(&grid, Scheme::Spectral);
        let u = random_field(&grid, 2, 1.0, seed);
        let stride = grid.stride(0) * 2;
        let mut vals = u.values().to_vec();
        vals.rotate_left(shift * stride);
        let shifted = Field::from_values(&grid, 2, vals).unwrap();
        let (a, b) = (action_value(&u, &pot, &op).unwrap(), action_value(&shifted, &pot, &op).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}
