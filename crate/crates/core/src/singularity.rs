//! Critical points of `φ` along the preintegration axis and the
//! singularities they produce in the preintegrated function.
//!
//! At a point `y*` with `∂φ/∂y_j = 0`, `∂²φ/∂y_j² ≠ 0` and `∇φ ≠ 0`, the
//! preintegral `P_j f_t` with `t = φ(y*)` behaves like `A·|s|^{1/2}` along
//! any probe line through `y*_{−j}` not orthogonal to `∇_{−j}φ(y*)`. With the
//! level curve written locally as `s = ζ(y_j)`, the amplitude is
//! `A = 2cρ(y_j*)` where `c = √(2/|ζ″|)` and `ζ″ = −φ_jj / (∇_{−j}φ·u)`.
//!
//! If in addition `∇ψ(y*) ≠ 0` for `ψ = ∂φ/∂y_j` and `∇ψ ∦ ∇φ`, the same
//! happens for every `t` near `φ(y*)`; [`find_level_point`] produces the
//! corresponding critical point `y^(t)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrand::{without, IndicatorSpec, Integrand};
use crate::normal::pdf;
use crate::preintegrate::{preintegrate, RootFinderConfig};

/// Threshold for "zero" first derivatives at a critical point.
pub const STATIONARY_TOL: f64 = 1e-8;
/// Threshold for "non-zero" analytic quantities.
pub const NONZERO_TOL: f64 = 1e-8;
/// Threshold for "non-zero" quantities that involve finite differences.
pub const FD_NONZERO_TOL: f64 = 1e-5;
const FD_STEP: f64 = 1e-5;

/// Neighbourhood radius for [`find_level_point`].
pub const LEVEL_SEARCH_RADIUS: f64 = 1.0;
const LEVEL_VALUE_TOL: f64 = 1e-10;
const LEVEL_STATIONARY_TOL: f64 = 1e-8;
const LEVEL_MAX_ITER: usize = 100;

/// Grid points discarded at each end of an exponent fit.
const FIT_TRIM: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conditions {
    pub d1_zero: bool,
    pub d2_nonzero: bool,
    pub grad_nonzero: bool,
    pub grad_dpsi_nonzero: bool,
    pub not_parallel: bool,
}

impl Conditions {
    /// Hypotheses for a square-root singularity at `t = φ(y*)`.
    pub fn square_root(&self) -> bool {
        self.d1_zero && self.d2_nonzero && self.grad_nonzero
    }

    /// Hypotheses for a family of critical points `y^(t)` around `y*`.
    pub fn non_isolated(&self) -> bool {
        self.d1_zero && self.grad_nonzero && self.grad_dpsi_nonzero && self.not_parallel
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPoint {
    pub y_star: Vec<f64>,
    pub axis: usize,
    pub t_star: f64,
    pub gradient: Vec<f64>,
    /// `∇(∂φ/∂y_j)` at `y*`.
    pub psi_gradient: Vec<f64>,
    pub conds: Conditions,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `∇(∂φ/∂y_j)(y)`: the `j` component from the analytic second derivative,
/// the others by central differences of `∂φ/∂y_j`.
pub fn psi_gradient(f: &dyn Integrand, y: &[f64], j: usize) -> Vec<f64> {
    (0..f.dim())
        .map(|k| {
            if k == j {
                f.d2(j, y)
            } else {
                let mut p = y.to_vec();
                let mut m = y.to_vec();
                p[k] += FD_STEP;
                m[k] -= FD_STEP;
                (f.d1(j, &p) - f.d1(j, &m)) / (2.0 * FD_STEP)
            }
        })
        .collect()
}

/// Sine of the angle between `a` and `b` (0 when either vanishes).
fn sin_angle(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let cos = dot(a, b) / (na * nb);
    (1.0 - cos * cos).max(0.0).sqrt()
}

pub fn check_sqrt_conditions(f: &dyn Integrand, y_star: &[f64], j: usize) -> CriticalPoint {
    let gradient = f.grad(y_star);
    let psi = psi_gradient(f, y_star, j);
    let d2 = f.d2(j, y_star);
    let grad_dpsi_nonzero = norm(&psi) > FD_NONZERO_TOL;
    let conds = Conditions {
        d1_zero: gradient[j].abs() <= STATIONARY_TOL,
        d2_nonzero: d2.abs() > NONZERO_TOL,
        grad_nonzero: norm(&gradient) > NONZERO_TOL,
        grad_dpsi_nonzero,
        not_parallel: grad_dpsi_nonzero && sin_angle(&gradient, &psi) > FD_NONZERO_TOL,
    };
    CriticalPoint {
        y_star: y_star.to_vec(),
        axis: j,
        t_star: f.eval(y_star),
        gradient,
        psi_gradient: psi,
        conds,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Right,
    Left,
    Both,
}

/// Local shape of the level set `φ = φ(y*)` seen along a probe line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeCurvature {
    /// `ζ″(y_j*)`
    pub zeta2: f64,
    /// `c = √(2/|ζ″|)`
    pub c: f64,
    /// Predicted `|P(s) − P(s*)| / √|s − s*|` as `s → s*` on [`Self::side`].
    pub amplitude: f64,
    /// The side of `s*` on which the preintegral varies.
    pub side: Side,
}

/// Curvature of the level set along the probe direction `u ∈ ℝ^{d−1}`.
pub fn probe_curvature(
    f: &dyn Integrand,
    y_star: &[f64],
    j: usize,
    direction: &[f64],
) -> Result<ProbeCurvature> {
    let grad_rest = without(j, &f.grad(y_star));
    if direction.len() != grad_rest.len() {
        return Err(Error::Config(format!(
            "probe direction must have {} components",
            grad_rest.len()
        )));
    }
    let slope = dot(&grad_rest, direction);
    if slope.abs() <= NONZERO_TOL {
        return Err(Error::OrthogonalGradient);
    }
    let zeta2 = -f.d2(j, y_star) / slope;
    let c = (2.0 / zeta2.abs()).sqrt();
    Ok(ProbeCurvature {
        zeta2,
        c,
        amplitude: 2.0 * c * pdf(y_star[j]),
        side: if zeta2 > 0.0 { Side::Right } else { Side::Left },
    })
}

/// [`probe_curvature`] for a two-dimensional `φ`, probing along the other
/// coordinate in its positive direction.
pub fn zeta_second_derivative(f: &dyn Integrand, y_star: &[f64], j: usize) -> Result<ProbeCurvature> {
    if f.dim() != 2 {
        return Err(Error::Config(format!("two-dimensional φ required, got d = {}", f.dim())));
    }
    probe_curvature(f, y_star, j, &[1.0])
}

/// Finds `y^(t)` near `y*` with `φ(y^(t)) = t` and `∂φ/∂y_j(y^(t)) = 0`.
///
/// Damped Gauss–Newton on `(φ − t, ∂φ/∂y_j) = 0` with minimum-norm steps,
/// started from `y*` and confined to the ball of radius
/// [`LEVEL_SEARCH_RADIUS`] around it.
pub fn find_level_point(f: &dyn Integrand, y_star: &[f64], j: usize, t: f64) -> Result<Vec<f64>> {
    let residual = |y: &[f64]| [f.eval(y) - t, f.d1(j, y)];
    let size = |r: &[f64; 2]| (r[0] * r[0] + r[1] * r[1]).sqrt();
    let mut y = y_star.to_vec();
    let mut r = residual(&y);

    for _ in 0..LEVEL_MAX_ITER {
        if r[0].abs() <= LEVEL_VALUE_TOL && r[1].abs() <= LEVEL_STATIONARY_TOL {
            return Ok(y);
        }
        let g = f.grad(&y);
        let p = psi_gradient(f, &y, j);
        let (a, b, c) = (dot(&g, &g), dot(&g, &p), dot(&p, &p));
        let det = a * c - b * b;
        if !(det > 1e-14 * a.max(c).powi(2)) {
            return Err(Error::OutOfNeighborhood(format!(
                "rank-deficient Jacobian at {y:?}"
            )));
        }
        // (J Jᵀ) λ = r, step = −Jᵀ λ
        let l0 = (c * r[0] - b * r[1]) / det;
        let l1 = (a * r[1] - b * r[0]) / det;
        let step: Vec<f64> = g.iter().zip(&p).map(|(gi, pi)| -(l0 * gi + l1 * pi)).collect();

        let current = size(&r);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let trial: Vec<f64> = y.iter().zip(&step).map(|(yi, si)| yi + alpha * si).collect();
            let rt = residual(&trial);
            if size(&rt) < current {
                accepted = Some((trial, rt));
                break;
            }
            alpha *= 0.5;
        }
        let (next, rn) = accepted.ok_or_else(|| {
            Error::OutOfNeighborhood(format!("no decrease along Gauss–Newton step at {y:?}"))
        })?;
        let dist = norm(&next.iter().zip(y_star).map(|(a, b)| a - b).collect::<Vec<_>>());
        if dist > LEVEL_SEARCH_RADIUS {
            return Err(Error::OutOfNeighborhood(format!(
                "iterate {next:?} is {dist:.3} from y*"
            )));
        }
        y = next;
        r = rn;
    }
    if r[0].abs() <= LEVEL_VALUE_TOL && r[1].abs() <= LEVEL_STATIONARY_TOL {
        return Ok(y);
    }
    Err(Error::OutOfNeighborhood(format!(
        "no convergence in {LEVEL_MAX_ITER} iterations"
    )))
}

/// Fitted local power law `|g(x0 ± h) − g(x0)| ≈ amplitude · h^exponent`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularityReport {
    pub location: f64,
    /// `+∞` when `g` is locally constant on the probed side(s).
    pub exponent: f64,
    pub amplitude: f64,
    pub side: Side,
    /// `(h, g(x0 ± h) − g(x0))` pairs used in the fit.
    pub fit_points: Vec<(f64, f64)>,
    /// Largest absolute deviation from the fitted line in log–log space.
    pub residual: f64,
}

impl SingularityReport {
    pub fn is_flat(&self) -> bool {
        self.exponent == f64::INFINITY
    }
}

/// `h = 2^{-k}` for `k = 4..=20`.
pub fn default_h_grid() -> Vec<f64> {
    (4..=20).map(|k| 2f64.powi(-k)).collect()
}

fn trimmed_grid(h_grid: &[f64]) -> Result<Vec<f64>> {
    if h_grid.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
        return Err(Error::Config("step sizes must be positive and finite".into()));
    }
    let mut hs = h_grid.to_vec();
    hs.sort_by(f64::total_cmp);
    hs.dedup();
    if hs.len() < 2 * FIT_TRIM + 2 {
        return Err(Error::Config(format!(
            "at least {} distinct step sizes required",
            2 * FIT_TRIM + 2
        )));
    }
    Ok(hs[FIT_TRIM..hs.len() - FIT_TRIM].to_vec())
}

/// Least-squares line through `(x, y)`: (slope, intercept, max residual).
pub(crate) fn fit_line(points: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return Err(Error::Regression("fewer than two points".into()));
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Regression("abscissae are all equal".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = points
        .iter()
        .map(|p| (p.1 - (slope * p.0 + intercept)).abs())
        .fold(0.0, f64::max);
    Ok((slope, intercept, residual))
}

/// Estimates the exponent `α` in `|g(x0 ± h) − g(x0)| ~ A hᵅ`.
///
/// The two largest and two smallest steps of `h_grid` are dropped before the
/// log–log regression. `g` is evaluated in parallel.
pub fn estimate_exponent<G>(g: G, x0: f64, side: Side, h_grid: &[f64]) -> Result<SingularityReport>
where
    G: Fn(f64) -> Result<f64> + Sync,
{
    let hs = trimmed_grid(h_grid)?;
    let base = g(x0)?;
    if !base.is_finite() {
        return Err(Error::Domain(format!("g({x0}) = {base} is not finite")));
    }
    let signs: &[f64] = match side {
        Side::Right => &[1.0],
        Side::Left => &[-1.0],
        Side::Both => &[1.0, -1.0],
    };
    let probes: Vec<(f64, f64)> = signs
        .iter()
        .flat_map(|&s| hs.iter().map(move |&h| (s, h)))
        .collect();
    let increments: Vec<(f64, f64)> = probes
        .par_iter()
        .map(|&(s, h)| {
            let v = g(x0 + s * h)?;
            if !v.is_finite() {
                return Err(Error::Domain(format!("g({}) = {v} is not finite", x0 + s * h)));
            }
            Ok((h, v - base))
        })
        .collect::<Result<_>>()?;

    let logs: Vec<(f64, f64)> = increments
        .iter()
        .filter(|p| p.1 != 0.0)
        .map(|&(h, dv)| (h.ln(), dv.abs().ln()))
        .collect();
    if logs.len() < 2 {
        return Ok(SingularityReport {
            location: x0,
            exponent: f64::INFINITY,
            amplitude: 0.0,
            side,
            fit_points: increments,
            residual: 0.0,
        });
    }
    let (slope, intercept, residual) = fit_line(&logs)?;
    Ok(SingularityReport {
        location: x0,
        exponent: slope,
        amplitude: intercept.exp(),
        side,
        fit_points: increments,
        residual,
    })
}

/// Exponents below which a probe counts as singular.
pub const FIRST_DIFFERENCE_SINGULAR_BELOW: f64 = 0.9;
pub const SECOND_DIFFERENCE_SINGULAR_BELOW: f64 = 1.75;

/// Pointwise smoothness probe at `x0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalProbe {
    pub location: f64,
    pub right_exponent: f64,
    pub left_exponent: f64,
    /// Exponent of the symmetric second difference `g(x0+h) + g(x0−h) − 2g(x0)`.
    pub curvature_exponent: f64,
    pub singular: bool,
}

/// `h = 2^{-k}` for `k = 4..=14`, coarse enough for second differences.
pub fn detection_h_grid() -> Vec<f64> {
    (4..=14).map(|k| 2f64.powi(-k)).collect()
}

/// Classifies `g` at `x0` as smooth or singular.
///
/// A smooth `g` has one-sided increments of order `h` (or smaller) and a
/// symmetric second difference of order `h²`. Square-root and cube-root
/// singularities fail the first test, kinks and `|x|`-type points the second.
pub fn detect_singularity<G>(g: G, x0: f64, h_grid: &[f64]) -> Result<LocalProbe>
where
    G: Fn(f64) -> Result<f64> + Sync,
{
    let right = estimate_exponent(&g, x0, Side::Right, h_grid)?;
    let left = estimate_exponent(&g, x0, Side::Left, h_grid)?;
    let base = g(x0)?;
    let hs = trimmed_grid(h_grid)?;
    let second: Vec<(f64, f64)> = hs
        .par_iter()
        .map(|&h| Ok((h, g(x0 + h)? + g(x0 - h)? - 2.0 * base)))
        .collect::<Result<_>>()?;
    let logs: Vec<(f64, f64)> = second
        .iter()
        .filter(|p| p.1 != 0.0)
        .map(|&(h, d)| (h.ln(), d.abs().ln()))
        .collect();
    let curvature_exponent = if logs.len() < 2 {
        f64::INFINITY
    } else {
        fit_line(&logs)?.0
    };
    let singular = right.exponent < FIRST_DIFFERENCE_SINGULAR_BELOW
        || left.exponent < FIRST_DIFFERENCE_SINGULAR_BELOW
        || curvature_exponent < SECOND_DIFFERENCE_SINGULAR_BELOW;
    Ok(LocalProbe {
        location: x0,
        right_exponent: right.exponent,
        left_exponent: left.exponent,
        curvature_exponent,
        singular,
    })
}

/// `s ↦ (P_j f)(y_{−j} + s·u)`, the preintegral along a probe line.
pub fn preintegral_along<'a>(
    spec: IndicatorSpec<'a>,
    j: usize,
    origin: &'a [f64],
    direction: &'a [f64],
    cfg: RootFinderConfig,
) -> impl Fn(f64) -> Result<f64> + Sync + 'a {
    move |s: f64| {
        let point: Vec<f64> = origin.iter().zip(direction).map(|(o, u)| o + s * u).collect();
        preintegrate(&spec, j, &point, &cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::AnalyticExample;
    use crate::normal::FRAC_1_SQRT_2PI;
    use approx::assert_abs_diff_eq;

    #[test]
    fn conditions_for_examples() {
        let cp = check_sqrt_conditions(&AnalyticExample::Parabola, &[0.0, 0.0], 0);
        assert!(cp.conds.square_root());
        assert!(cp.conds.non_isolated());
        assert_eq!(cp.t_star, 0.0);

        let cp = check_sqrt_conditions(&AnalyticExample::Cross, &[0.0, 0.0], 0);
        assert!(!cp.conds.grad_nonzero);
        assert!(cp.conds.d1_zero && cp.conds.d2_nonzero);

        let cp = check_sqrt_conditions(&AnalyticExample::Cubic, &[0.0, 0.0], 0);
        assert!(cp.conds.d1_zero);
        assert!(!cp.conds.d2_nonzero);
        assert!(!cp.conds.grad_dpsi_nonzero);

        let cp = check_sqrt_conditions(&AnalyticExample::Hyperbola, &[0.0, 1.0], 0);
        assert!(cp.conds.square_root() && cp.conds.non_isolated());
        assert_eq!(cp.t_star, 0.0);

        let cp = check_sqrt_conditions(&AnalyticExample::Parabola, &[0.5, 0.0], 0);
        assert!(!cp.conds.d1_zero);
    }

    #[test]
    fn curvature_values() {
        let k = zeta_second_derivative(&AnalyticExample::Parabola, &[0.0, 0.0], 0).unwrap();
        assert_eq!(k.zeta2, 2.0);
        assert_eq!(k.c, 1.0);
        assert_abs_diff_eq!(k.amplitude, 0.7978845608028654, epsilon = 1e-15);
        assert_eq!(k.side, Side::Right);

        let k = zeta_second_derivative(&AnalyticExample::Hyperbola, &[0.0, 1.0], 0).unwrap();
        assert_eq!(k.zeta2, 1.0);
        assert_abs_diff_eq!(k.c, 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(k.amplitude, std::f64::consts::FRAC_2_SQRT_PI, epsilon = 1e-15);

        let k = zeta_second_derivative(&AnalyticExample::Hyperbola, &[0.0, -1.0], 0).unwrap();
        assert_eq!(k.side, Side::Left);

        assert!(matches!(
            zeta_second_derivative(&AnalyticExample::Cross, &[0.0, 0.0], 0),
            Err(Error::OrthogonalGradient)
        ));
    }

    #[test]
    fn level_points() {
        let y = find_level_point(&AnalyticExample::Parabola, &[0.0, 0.0], 0, 0.3).unwrap();
        assert_abs_diff_eq!(y[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(y[1], 0.3, epsilon = 1e-10);

        let y = find_level_point(&AnalyticExample::Cross, &[0.0, 1.0], 0, 0.25).unwrap();
        assert_abs_diff_eq!(y[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(y[1], 0.5, epsilon = 1e-10);

        for id in [AnalyticExample::Parabola, AnalyticExample::Hyperbola] {
            let y_star = [0.0, 1.0];
            let y = find_level_point(&id, &y_star, 0, id.eval(&y_star)).unwrap();
            assert_abs_diff_eq!(y[0], y_star[0], epsilon = 1e-8);
            assert_abs_diff_eq!(y[1], y_star[1], epsilon = 1e-8);
        }
    }

    #[test]
    fn level_point_outside_ball() {
        let r = find_level_point(&AnalyticExample::Parabola, &[0.0, 0.0], 0, 5.0);
        assert!(matches!(r, Err(Error::OutOfNeighborhood(_))));
    }

    #[test]
    fn level_point_rank_deficient() {
        // Cubic: ∇ψ vanishes at the origin
        let r = find_level_point(&AnalyticExample::Cubic, &[0.0, 0.0], 0, 0.1);
        assert!(matches!(r, Err(Error::OutOfNeighborhood(_))));
    }

    #[test]
    fn exact_power_law() {
        let r = estimate_exponent(|x: f64| Ok(x.max(0.0).sqrt()), 0.0, Side::Right, &default_h_grid())
            .unwrap();
        assert_abs_diff_eq!(r.exponent, 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(r.amplitude, 1.0, epsilon = 1e-6);
        assert!(r.residual < 1e-10);
        assert_eq!(r.fit_points.len(), 13);
    }

    #[test]
    fn flat_signal() {
        let r = estimate_exponent(|_x: f64| Ok(0.25), 1.0, Side::Both, &default_h_grid()).unwrap();
        assert!(r.is_flat());
    }

    #[test]
    fn grid_validation() {
        let g = |x: f64| Ok(x);
        assert!(estimate_exponent(g, 0.0, Side::Right, &[0.1, 0.01]).is_err());
        assert!(estimate_exponent(g, 0.0, Side::Right, &[0.1, -0.01, 0.2, 0.3, 0.4, 0.5]).is_err());
    }

    #[test]
    fn detector_classifies_model_functions() {
        let grid = detection_h_grid();
        let smooth = detect_singularity(|x: f64| Ok((2.0 * x).sin()), 0.3, &grid).unwrap();
        assert!(!smooth.singular, "{smooth:?}");
        let sqrt = detect_singularity(|x: f64| Ok(x.max(0.0).sqrt()), 0.0, &grid).unwrap();
        assert!(sqrt.singular);
        let abs = detect_singularity(|x: f64| Ok(x.abs()), 0.0, &grid).unwrap();
        assert!(abs.singular);
        let cbrt = detect_singularity(|x: f64| Ok(x.cbrt()), 0.0, &grid).unwrap();
        assert!(cbrt.singular);
        let flat_min = detect_singularity(|x: f64| Ok(x * x), 0.0, &grid).unwrap();
        assert!(!flat_min.singular, "{flat_min:?}");
    }

    #[test]
    fn parabola_preintegral_exponent() {
        let spec = IndicatorSpec::jump(&AnalyticExample::Parabola, 0.0);
        let origin = [0.0];
        let dir = [1.0];
        let g = preintegral_along(spec, 0, &origin, &dir, RootFinderConfig::default());
        let r = estimate_exponent(&g, 0.0, Side::Right, &default_h_grid()).unwrap();
        assert_abs_diff_eq!(r.exponent, 0.5, epsilon = 0.02);
        assert!((r.amplitude / (2.0 * FRAC_1_SQRT_2PI) - 1.0).abs() < 0.02);
        let left = estimate_exponent(&g, 0.0, Side::Left, &default_h_grid()).unwrap();
        assert!(left.is_flat());
        assert!(left.fit_points.iter().all(|p| p.1 == 0.0));
    }
}
