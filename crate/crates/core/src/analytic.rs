//! Two-dimensional closed-form test functions and their exact preintegrals.
//!
//! | example     | φ(y₁, y₂)       |
//! |-------------|-----------------|
//! | `Parabola`  | y₂ − y₁²        |
//! | `Hyperbola` | y₂² − y₁² − 1   |
//! | `Cross`     | y₂² − y₁²       |
//! | `Cubic`     | y₁³ − y₂        |
//!
//! Axis indices are zero based: axis 0 is `y₁`, axis 1 is `y₂`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::integrand::Integrand;
use crate::normal::{pdf, sf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AnalyticExample {
    Parabola,
    Hyperbola,
    Cross,
    Cubic,
}

impl AnalyticExample {
    pub const ALL: [AnalyticExample; 4] = [
        AnalyticExample::Parabola,
        AnalyticExample::Hyperbola,
        AnalyticExample::Cross,
        AnalyticExample::Cubic,
    ];

    /// Axes for which [`oracle_preintegral`] has a closed form.
    pub fn oracle_axes(self) -> &'static [usize] {
        match self {
            AnalyticExample::Parabola => &[0, 1],
            _ => &[0],
        }
    }
}

impl fmt::Display for AnalyticExample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            AnalyticExample::Parabola => "parabola",
            AnalyticExample::Hyperbola => "hyperbola",
            AnalyticExample::Cross => "cross",
            AnalyticExample::Cubic => "cubic",
        };
        f.write_str(name)
    }
}

impl FromStr for AnalyticExample {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "parabola" | "1" => Ok(AnalyticExample::Parabola),
            "hyperbola" | "2" => Ok(AnalyticExample::Hyperbola),
            "cross" | "3" => Ok(AnalyticExample::Cross),
            "cubic" | "4" => Ok(AnalyticExample::Cubic),
            other => Err(Error::Config(format!("unknown example '{other}'"))),
        }
    }
}

impl Integrand for AnalyticExample {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, y: &[f64]) -> f64 {
        let (a, b) = (y[0], y[1]);
        match self {
            AnalyticExample::Parabola => b - a * a,
            AnalyticExample::Hyperbola => b * b - a * a - 1.0,
            AnalyticExample::Cross => b * b - a * a,
            AnalyticExample::Cubic => a * a * a - b,
        }
    }

    fn d1(&self, j: usize, y: &[f64]) -> f64 {
        let (a, b) = (y[0], y[1]);
        match (self, j) {
            (AnalyticExample::Parabola, 0) => -2.0 * a,
            (AnalyticExample::Parabola, _) => 1.0,
            (AnalyticExample::Hyperbola | AnalyticExample::Cross, 0) => -2.0 * a,
            (AnalyticExample::Hyperbola | AnalyticExample::Cross, _) => 2.0 * b,
            (AnalyticExample::Cubic, 0) => 3.0 * a * a,
            (AnalyticExample::Cubic, _) => -1.0,
        }
    }

    fn d2(&self, j: usize, y: &[f64]) -> f64 {
        match (self, j) {
            (AnalyticExample::Parabola, 0) => -2.0,
            (AnalyticExample::Parabola, _) => 0.0,
            (AnalyticExample::Hyperbola | AnalyticExample::Cross, 0) => -2.0,
            (AnalyticExample::Hyperbola | AnalyticExample::Cross, _) => 2.0,
            (AnalyticExample::Cubic, 0) => 6.0 * y[0],
            (AnalyticExample::Cubic, _) => 0.0,
        }
    }
}

/// `∫_{−√c}^{√c} ρ`, zero for `c ≤ 0`.
fn centred_mass(c: f64) -> f64 {
    if c <= 0.0 {
        0.0
    } else {
        libm::erf(c.sqrt() * FRAC_1_SQRT_2)
    }
}

/// Closed form of `(P_j f_t)(coord)` for the jump integrand `ind(φ − t)`,
/// where `coord` is the remaining coordinate.
pub fn oracle_preintegral(id: AnalyticExample, j: usize, t: f64, coord: f64) -> Result<f64> {
    match (id, j) {
        (AnalyticExample::Parabola, 0) => Ok(centred_mass(coord - t)),
        (AnalyticExample::Parabola, 1) => Ok(sf(coord * coord + t)),
        (AnalyticExample::Hyperbola, 0) => Ok(centred_mass(coord * coord - 1.0 - t)),
        (AnalyticExample::Cross, 0) => Ok(centred_mass(coord * coord - t)),
        (AnalyticExample::Cubic, 0) => Ok(sf((coord + t).cbrt())),
        _ => Err(Error::Unsupported(format!(
            "no closed-form preintegral for {id} along axis {j}"
        ))),
    }
}

/// Closed form of `(P_1 f)(y₂)` for the parabola with the kink integrand
/// `max(φ − t, 0)`.
///
/// With `c = y₂ − t` and `s = √c`, integration by parts gives
/// `∫_{−s}^{s} (c − y²) ρ(y) dy = (c − 1)(Φ(s) − Φ(−s)) + 2 s ρ(s)`.
pub fn oracle_kink_preintegral(t: f64, coord: f64) -> f64 {
    let c = coord - t;
    if c <= 0.0 {
        return 0.0;
    }
    let s = c.sqrt();
    (c - 1.0) * centred_mass(c) + 2.0 * s * pdf(s)
}
