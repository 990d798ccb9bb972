//! Smooth functions `φ: ℝ^d → ℝ` and the indicator/kink integrands built on
//! top of them.

use std::fmt;

/// A smooth function with per-axis first and second derivatives.
///
/// Only `∂/∂y_j`, `∂²/∂y_j²` and the gradient are ever needed, so no Hessian
/// is exposed. Implementations must be pure.
pub trait Integrand: Sync {
    fn dim(&self) -> usize;

    fn eval(&self, y: &[f64]) -> f64;

    fn d1(&self, j: usize, y: &[f64]) -> f64;

    fn d2(&self, j: usize, y: &[f64]) -> f64;

    fn grad(&self, y: &[f64]) -> Vec<f64> {
        (0..self.dim()).map(|j| self.d1(j, y)).collect()
    }

    /// Specialised restriction of `φ` to an axis-parallel line, for
    /// implementations that can precompute everything independent of `y_j`.
    /// The default `None` makes [`restrict`] fall back to full evaluations.
    fn line(&self, _j: usize, _y: &[f64]) -> Option<Box<dyn LineFunction + '_>> {
        None
    }
}

/// Restriction of `f` to the line through `y` parallel to axis `j`.
///
/// The value of `y[j]` is ignored.
pub fn restrict<'a>(f: &'a dyn Integrand, j: usize, y: &[f64]) -> Box<dyn LineFunction + 'a> {
    f.line(j, y).unwrap_or_else(|| {
        Box::new(AxisSlice {
            base: f,
            axis: j,
            point: y.to_vec(),
        })
    })
}

/// A function of one real variable with two derivatives.
pub trait LineFunction {
    fn value(&self, x: f64) -> f64;
    fn d1(&self, x: f64) -> f64;
    fn d2(&self, x: f64) -> f64;
}

struct AxisSlice<'a> {
    base: &'a dyn Integrand,
    axis: usize,
    point: Vec<f64>,
}

impl AxisSlice<'_> {
    fn at(&self, x: f64) -> Vec<f64> {
        let mut y = self.point.clone();
        y[self.axis] = x;
        y
    }
}

impl LineFunction for AxisSlice<'_> {
    fn value(&self, x: f64) -> f64 {
        self.base.eval(&self.at(x))
    }
    fn d1(&self, x: f64) -> f64 {
        self.base.d1(self.axis, &self.at(x))
    }
    fn d2(&self, x: f64) -> f64 {
        self.base.d2(self.axis, &self.at(x))
    }
}

/// Inserts `x` at position `j` of `y_minus_j`, giving a full point.
pub fn assemble(j: usize, x: f64, y_minus_j: &[f64]) -> Vec<f64> {
    let mut y = Vec::with_capacity(y_minus_j.len() + 1);
    y.extend_from_slice(&y_minus_j[..j]);
    y.push(x);
    y.extend_from_slice(&y_minus_j[j..]);
    y
}

/// Drops coordinate `j` from `y`.
pub fn without(j: usize, y: &[f64]) -> Vec<f64> {
    y.iter()
        .enumerate()
        .filter(|&(k, _)| k != j)
        .map(|(_, &v)| v)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flavor {
    /// `ind(φ(y) − t)`
    Jump,
    /// `max(φ(y) − t, 0)`
    Kink,
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Flavor::Jump => f.write_str("jump"),
            Flavor::Kink => f.write_str("kink"),
        }
    }
}

/// A discontinuous (or kinked) integrand `θ(y)·ind(φ(y) − t)` with
/// `θ ≡ 1` for [`Flavor::Jump`] and `θ = φ − t` for [`Flavor::Kink`].
#[derive(Clone, Copy)]
pub struct IndicatorSpec<'a> {
    pub base: &'a dyn Integrand,
    pub threshold: f64,
    pub flavor: Flavor,
}

impl<'a> IndicatorSpec<'a> {
    pub fn jump(base: &'a dyn Integrand, threshold: f64) -> Self {
        IndicatorSpec {
            base,
            threshold,
            flavor: Flavor::Jump,
        }
    }

    pub fn kink(base: &'a dyn Integrand, threshold: f64) -> Self {
        IndicatorSpec {
            base,
            threshold,
            flavor: Flavor::Kink,
        }
    }

    /// The integrand value `f_t(y)`.
    pub fn value(&self, y: &[f64]) -> f64 {
        let excess = self.base.eval(y) - self.threshold;
        match self.flavor {
            Flavor::Jump => {
                if excess > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Flavor::Kink => excess.max(0.0),
        }
    }
}

impl fmt::Debug for IndicatorSpec<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IndicatorSpec")
            .field("dim", &self.base.dim())
            .field("threshold", &self.threshold)
            .field("flavor", &self.flavor)
            .finish()
    }
}
