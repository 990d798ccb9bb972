//! Standard normal density, distribution function and quantile.
//!
//! `cdf` goes through the complementary error function so both tails keep
//! full relative accuracy; `±∞` are accepted and map to 0 and 1.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};

/// 1/√(2π)
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[inline]
pub fn pdf(y: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * y * y).exp()
}

#[inline]
pub fn cdf(y: f64) -> f64 {
    0.5 * libm::erfc(-y * FRAC_1_SQRT_2)
}

/// Upper tail `1 − Φ(y)`, accurate for large positive `y`.
#[inline]
pub fn sf(y: f64) -> f64 {
    cdf(-y)
}

/// Normal mass of the interval `(a, b)`, either end may be infinite.
///
/// Picks the tail on which the subtraction is better conditioned.
pub fn interval_mass(a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if a >= 0.0 {
        sf(a) - sf(b)
    } else if b <= 0.0 {
        cdf(b) - cdf(a)
    } else {
        1.0 - cdf(a) - sf(b)
    }
}

#[allow(clippy::excessive_precision)]
fn quantile_as241(p: f64) -> f64 {
    // Wichura, AS241 (PPND16), Appl. Statist. 37 (1988).
    const SPLIT1: f64 = 0.425;
    const SPLIT2: f64 = 5.0;
    const CONST1: f64 = 0.180625;
    const CONST2: f64 = 1.6;

    const A: [f64; 8] = [
        3.3871328727963665,
        1.3314166789178439e+2,
        1.9715909503065514e+3,
        1.373169376550946e+4,
        4.592195393154987e+4,
        6.72657709270087e+4,
        3.343057558358813e+4,
        2.5090809287301226e+3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231333070160091e+1,
        6.871870074920579e+2,
        5.394196021424751e+3,
        2.1213794301586595e+4,
        3.930789580009271e+4,
        2.8729085735721944e+4,
        5.2264952788528545e+3,
    ];
    const C: [f64; 8] = [
        1.4234371107496835,
        4.630337846156546,
        5.769497221460691,
        3.6478483247632045,
        1.2704582524523684,
        0.2417807251774506,
        0.022723844989269184,
        0.0007745450142783414,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053191626637759,
        1.6763848301838038,
        0.6897673349851,
        0.14810397642748008,
        0.015198666563616457,
        0.0005475938084995345,
        1.0507500716444169e-09,
    ];
    const E: [f64; 8] = [
        6.657904643501103,
        5.463784911164114,
        1.7848265399172913,
        0.29656057182850487,
        0.026532189526576124,
        0.0012426609473880784,
        2.7115555687434876e-05,
        2.0103343992922881e-07,
    ];
    const F: [f64; 8] = [
        1.0,
        0.599832206555888,
        0.1369298809227358,
        0.014875361290850615,
        0.0007868691311456133,
        1.8463183175100548e-05,
        1.421511758316446e-07,
        2.0442631033899397e-15,
    ];

    fn horner(c: &[f64; 8], x: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
    }

    let q = p - 0.5;
    if q.abs() <= SPLIT1 {
        let r = CONST1 - q * q;
        return q * horner(&A, r) / horner(&B, r);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let x = if r <= SPLIT2 {
        r -= CONST2;
        horner(&C, r) / horner(&D, r)
    } else {
        r -= SPLIT2;
        horner(&E, r) / horner(&F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// Inverse of [`cdf`] on the open unit interval.
///
/// Rational approximation followed by one Halley correction.
pub fn inv_cdf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("inv_cdf requires 0 < p < 1, got {p}")));
    }
    let x = quantile_as241(p);
    // residual taken on the smaller tail to avoid cancellation near 1
    let e = if x <= 0.0 {
        cdf(x) - p
    } else {
        (1.0 - p) - sf(x)
    };
    let dens = pdf(x);
    if dens <= 0.0 || !e.is_finite() {
        return Ok(x);
    }
    let u = e / dens;
    Ok(x - u / (1.0 + 0.5 * x * u))
}


#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn pdf_values() {
        assert_abs_diff_eq!(pdf(0.0), 0.3989422804014327, epsilon = 1e-16);
        assert_eq!(pdf(1.0), pdf(-1.0));
        // mpmath, 30 digits
        assert_abs_diff_eq!(pdf(2.0), 0.05399096651318805, epsilon = 1e-15);
    }

    #[test]
    fn cdf_values() {
        assert_eq!(cdf(0.0), 0.5);
        assert_abs_diff_eq!(cdf(1.0), 0.8413447460685429, epsilon = 1e-14);
        assert_abs_diff_eq!(cdf(5.0), 0.9999997133484281, epsilon = 1e-14);
        assert_eq!(cdf(f64::INFINITY), 1.0);
        assert_eq!(cdf(f64::NEG_INFINITY), 0.0);
        // relative accuracy deep in the lower tail
        let rel = (cdf(-8.0) - 6.220960574271784e-16).abs() / 6.22e-16;
        assert!(rel < 1e-13, "{rel}");
        let rel = (cdf(-30.0) - 4.906713927148187e-198).abs() / 4.9e-198;
        assert!(rel < 1e-12, "{rel}");
    }

    #[test]
    fn interval_mass_matches_differences() {
        assert_abs_diff_eq!(interval_mass(-1.0, 1.0), 0.6826894921370859, epsilon = 1e-15);
        assert_abs_diff_eq!(interval_mass(1.0, f64::INFINITY), 0.15865525393145705, epsilon = 1e-15);
        assert_eq!(interval_mass(f64::NEG_INFINITY, f64::INFINITY), 1.0);
        assert_eq!(interval_mass(2.0, 1.0), 0.0);
        // far tail keeps relative accuracy
        let m = interval_mass(8.0, 9.0);
        let oracle = cdf(-8.0) - cdf(-9.0);
        assert!((m - oracle).abs() <= 1e-14 * oracle);
    }

    #[test]
    fn inv_cdf_values() {
        assert_eq!(inv_cdf(0.5).unwrap(), 0.0);
        assert_abs_diff_eq!(inv_cdf(0.8413447460685429).unwrap(), 1.0, epsilon = 1e-8);
        let x = inv_cdf(1e-13).unwrap();
        assert!(x.is_finite());
        assert_abs_diff_eq!(x, -7.348796102800677, epsilon = 1e-10);
        assert!(((cdf(x) - 1e-13) / 1e-13).abs() < 1e-8);
    }

    #[test]
    fn inv_cdf_domain() {
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(inv_cdf(p), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn cdf_monotone_on_sorted_sample() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut ys: Vec<f64> = (0..10_000).map(|_| rng.random_range(-40.0..40.0)).collect();
        ys.sort_by(f64::total_cmp);
        for w in ys.windows(2) {
            assert!(cdf(w[0]) <= cdf(w[1]));
        }
    }

    #[test]
    fn round_trip_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let p: f64 = rng.random_range(1e-12..1.0 - 1e-12);
            let x = inv_cdf(p).unwrap();
            assert!((cdf(x) - p).abs() <= 1e-9, "p={p}");
        }
    }

    proptest! {
        #[test]
        fn derivative_consistency(y in -6.0f64..6.0) {
            let h = 1e-5;
            let fd = (cdf(y + h) - cdf(y - h)) / (2.0 * h);
            prop_assert!((fd - pdf(y)).abs() < 1e-9);
        }

        #[test]
        fn symmetry(y in -30.0f64..30.0) {
            prop_assert!((cdf(-y) - (1.0 - cdf(y))).abs() < 1e-15);
            prop_assert_eq!(pdf(y), pdf(-y));
        }

        #[test]
        fn round_trip_log_uniform(e in -12.0f64..-0.31) {
            let p = 10f64.powf(e);
            let x = inv_cdf(p).unwrap();
            prop_assert!(((cdf(x) - p) / p).abs() < 1e-8);
            let y = inv_cdf(1.0 - p).unwrap();
            prop_assert!((sf(y) - (1.0 - (1.0 - p))).abs() <= 1e-9);
        }
    }
}
