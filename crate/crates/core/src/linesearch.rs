//! Backtracking Armijo line search with step expansion.
//!
//! A trial is accepted on the Armijo condition, or, once the decrease is
//! below floating-point resolution of the objective, when the value has not
//! risen by more than `noise_rel · |f0|` and the slope magnitude has not
//! grown. While the slope at an accepted trial is still steeper than
//! `c2 · d0` and no failing trial has been seen, the step doubles.

use crate::error::Result;

#[derive(Debug, Clone, Copy)]
pub(crate) struct LineSearchParams {
    pub c1: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub c2: f64,
    pub max_expansions: usize,
    pub noise_rel: f64,
}

impl Default for LineSearchParams {
    fn default() -> Self {
        Self {
            c1: 1e-4,
            backtrack: 0.5,
            max_backtracks: 60,
            c2: 0.9,
            max_expansions: 40,
            noise_rel: 1e-12,
        }
    }
}

pub(crate) struct Trial<T> {
    pub alpha: f64,
    pub value: f64,
    pub payload: T,
}

/// Objective along the ray: `(value, slope, payload)`, or `None` when the
/// value is not finite.
pub(crate) type Probe<T> = Option<(f64, f64, T)>;

pub(crate) fn search<T>(
    f0: f64,
    d0: f64,
    alpha0: f64,
    params: &LineSearchParams,
    mut eval: impl FnMut(f64) -> Result<Probe<T>>,
) -> Result<Option<Trial<T>>> {
    debug_assert!(d0 < 0.0);
    let mut alpha = alpha0;
    let mut best: Option<Trial<T>> = None;
    let mut failed_once = false;
    let mut backtracks = 0;
    let mut expansions = 0;
    loop {
        let accepted = match eval(alpha)? {
            Some((value, slope, payload)) if value.is_finite() && slope.is_finite() => {
                let armijo = value <= f0 + params.c1 * alpha * d0;
                let within_noise =
                    value <= f0 + params.noise_rel * f0.abs() && slope.abs() <= d0.abs();
                (armijo || within_noise).then_some((value, slope, payload))
            }
            _ => None,
        };
        match accepted {
            Some((value, slope, payload)) => {
                let trial = Trial {
                    alpha,
                    value,
                    payload,
                };
                if slope < params.c2 * d0 && !failed_once && expansions < params.max_expansions {
                    best = Some(trial);
                    alpha *= 2.0;
                    expansions += 1;
                    continue;
                }
                return Ok(Some(trial));
            }
            None => {
                if best.is_some() {
                    return Ok(best);
                }
                failed_once = true;
                backtracks += 1;
                if backtracks > params.max_backtracks {
                    return Ok(None);
                }
                alpha *= params.backtrack;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(alpha: f64) -> Result<Probe<()>> {
        // f(α) = (α − 0.3)², f(0) = 0.09, f'(0) = −0.6
        Ok(Some(((alpha - 0.3).powi(2), 2.0 * (alpha - 0.3), ())))
    }

    #[test]
    fn backtracks_to_sufficient_decrease() {
        let p = LineSearchParams::default();
        let t = search(0.09, -0.6, 1.0, &p, quad).unwrap().unwrap();
        assert_eq!(t.alpha, 0.5);
        assert!(t.value < 0.09);
    }

    #[test]
    fn expands_along_linear_descent() {
        let p = LineSearchParams::default();
        let t = search(0.0, -1.0, 1.0, &p, |a| Ok(Some((-a, -1.0, ()))))
            .unwrap()
            .unwrap();
        assert_eq!(t.alpha, 2f64.powi(40));
    }

    #[test]
    fn non_finite_values_shrink_the_step() {
        let p = LineSearchParams::default();
        let t = search(0.09, -0.6, 8.0, &p, |a| {
            if a > 1.0 {
                Ok(None)
            } else {
                quad(a)
            }
        })
        .unwrap()
        .unwrap();
        assert!(t.alpha <= 0.5);
    }

    #[test]
    fn reports_failure_after_max_backtracks() {
        let p = LineSearchParams::default();
        let r = search(0.0, -1.0, 1.0, &p, |a| Ok(Some((1.0 + a, 1.0, ())))).unwrap();
        assert!(r.is_none());
    }
}
