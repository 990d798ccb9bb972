//! Bracketed root refinement: Newton steps that fall back to bisection
//! whenever they would leave the bracket or stop contracting.

use crate::error::{Error, Result};

/// Refines a root of `f` inside `[lo, hi]`, where `f(lo)` and `f(hi)` have
/// opposite signs (or one of them is zero).
///
/// Stops when `|f(x)| ≤ tol` (after one final Newton correction) or the
/// bracket has shrunk to a few ulps.
/// Non-finite derivative values or Newton steps are replaced by bisection;
/// a NaN function value is an evaluation error.
#[allow(clippy::too_many_arguments)]
pub fn safeguarded_newton<F, D>(
    f: F,
    df: D,
    mut lo: f64,
    mut hi: f64,
    mut f_lo: f64,
    f_hi: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::RootRefinement { lo, hi });
    }
    let (orig_lo, orig_hi) = (lo, hi);
    let mut x = 0.5 * (lo + hi);
    let mut step_before_last = hi - lo;
    let mut last_step = step_before_last;

    for _ in 0..max_iter {
        let fx = f(x);
        if fx.is_nan() {
            return Err(Error::Evaluation { at: x });
        }
        if fx.abs() <= tol {
            // one last Newton correction, kept only if it stays bracketed
            let polished = x - fx / df(x);
            return Ok(if polished.is_finite() && polished >= lo && polished <= hi {
                polished
            } else {
                x
            });
        }
        if fx.signum() == f_lo.signum() {
            lo = x;
            f_lo = fx;
        } else {
            hi = x;
        }
        let width = hi - lo;
        if width <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE) {
            return Ok(x);
        }

        let slope = df(x);
        let newton = x - fx / slope;
        let contracting = (newton - x).abs() * 2.0 <= step_before_last.abs();
        let next = if newton.is_finite() && newton > lo && newton < hi && contracting {
            newton
        } else {
            0.5 * (lo + hi)
        };
        step_before_last = last_step;
        last_step = next - x;
        if next == x {
            return Ok(x);
        }
        x = next;
    }
    Err(Error::RootRefinement {
        lo: orig_lo,
        hi: orig_hi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let f = |x: f64| x * x - 2.0;
        let df = |x: f64| 2.0 * x;
        let r = safeguarded_newton(f, df, 0.0, 2.0, -2.0, 2.0, 1e-15, 50).unwrap();
        assert!((r - std::f64::consts::SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn survives_flat_derivative() {
        // Newton from the midpoint would jump far outside the bracket
        let f = |x: f64| (x - 0.3).powi(3);
        let df = |x: f64| 3.0 * (x - 0.3).powi(2);
        let r = safeguarded_newton(f, df, -1.0, 1.0, f(-1.0), f(1.0), 1e-30, 200).unwrap();
        assert!((r - 0.3).abs() < 1e-9);
    }

    #[test]
    fn handles_infinite_values() {
        let f = |x: f64| if x > 5.0 { f64::INFINITY } else { x - 1.0 };
        let df = |_x: f64| 1.0;
        let r = safeguarded_newton(f, df, 0.0, 10.0, -1.0, f64::INFINITY, 1e-14, 100).unwrap();
        assert!((r - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_unbracketed() {
        let f = |x: f64| x * x + 1.0;
        let r = safeguarded_newton(f, |x| 2.0 * x, -1.0, 1.0, 2.0, 2.0, 1e-12, 50);
        assert!(matches!(r, Err(Error::RootRefinement { .. })));
    }

    #[test]
    fn nan_is_an_evaluation_error() {
        let f = |x: f64| if x > 0.0 { f64::NAN } else { x - 1.0 };
        let r = safeguarded_newton(f, |_| 1.0, -1.0, 2.0, -2.0, 1.0, 1e-12, 50);
        assert!(matches!(r, Err(Error::Evaluation { .. })));
    }

    #[test]
    fn iteration_cap_reports_bracket() {
        let f = |x: f64| x - 0.123456789;
        let r = safeguarded_newton(f, |_| 0.0, 0.0, 1.0, f(0.0), f(1.0), 1e-300, 3);
        match r {
            Err(Error::RootRefinement { lo, hi }) => assert_eq!((lo, hi), (0.0, 1.0)),
            other => panic!("{other:?}"),
        }
    }
}
