//! The preintegration operator `(P_j f)(y_{−j}) = ∫ f(y_j, y_{−j}) ρ(y_j) dy_j`.
//!
//! The general path scans `[−L, L]` for sign changes of `φ − t` along axis
//! `j`, inserting the stationary points of `φ` found between grid nodes, and
//! refines every crossing with a safeguarded Newton iteration. The normal
//! mass of the resulting positivity intervals is accumulated exactly.
//!
//! [`preintegrate_convex`] is the fast path for functions that are strictly
//! convex along the axis: one turning point, at most two crossings.

use crate::error::{Error, Result};
use crate::integrand::{assemble, restrict, Flavor, IndicatorSpec, LineFunction};
use crate::normal::{cdf, interval_mass, pdf, sf};
use crate::quadrature;
use crate::roots::safeguarded_newton;

/// Bracket-expansion cap for the convex path (the step doubles each time).
const MAX_DOUBLINGS: usize = 64;

/// Iteration cap for refinements that run to ulp width, possibly from
/// brackets found by doubling: bisection alone may need over a hundred
/// halvings.
fn expanded_budget(cfg: &RootFinderConfig) -> usize {
    cfg.max_iter.max(200)
}

/// Quadrature tolerances for the kink flavour.
const KINK_ABS_TOL: f64 = 1e-10;
const KINK_REL_TOL: f64 = 1e-12;
const KINK_MAX_PANELS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootFinderConfig {
    /// Half-width `L` of the scanned range `[−L, L]`.
    pub scan_halfwidth: f64,
    pub scan_points: usize,
    /// Tolerance on `|φ − t|` at a refined crossing.
    pub root_tol: f64,
    pub max_iter: usize,
}

impl Default for RootFinderConfig {
    fn default() -> Self {
        RootFinderConfig {
            scan_halfwidth: 10.0,
            scan_points: 1024,
            root_tol: 1e-12,
            max_iter: 50,
        }
    }
}

impl RootFinderConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.scan_halfwidth > 0.0 && self.scan_halfwidth.is_finite()) {
            return Err(Error::Config(format!(
                "scan half-width must be positive, got {}",
                self.scan_halfwidth
            )));
        }
        if self.scan_points < 16 {
            return Err(Error::Config(format!(
                "at least 16 scan points required, got {}",
                self.scan_points
            )));
        }
        if !(self.root_tol > 0.0) {
            return Err(Error::Config(format!(
                "root tolerance must be positive, got {}",
                self.root_tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// The set `{y_j : φ(y_j, y_{−j}) > t}` as disjoint sorted open intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalDecomposition {
    /// `(a, b)` pairs with `a < b`; unbounded ends are `±∞`.
    pub intervals: Vec<(f64, f64)>,
    /// Finite interval endpoints, sorted. Each is a crossing of level `t`.
    pub roots: Vec<f64>,
    /// The whole line is positive.
    pub saturated: bool,
}

impl IntervalDecomposition {
    fn from_intervals(intervals: Vec<(f64, f64)>) -> Self {
        let mut roots: Vec<f64> = intervals
            .iter()
            .flat_map(|&(a, b)| [a, b])
            .filter(|x| x.is_finite())
            .collect();
        roots.sort_by(f64::total_cmp);
        let saturated =
            intervals.len() == 1 && intervals[0].0 == f64::NEG_INFINITY && intervals[0].1 == f64::INFINITY;
        IntervalDecomposition {
            intervals,
            roots,
            saturated,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Standard normal mass of the union of intervals.
    pub fn mass(&self) -> f64 {
        if self.saturated {
            return 1.0;
        }
        let m: f64 = self.intervals.iter().map(|&(a, b)| interval_mass(a, b)).sum();
        m.clamp(0.0, 1.0)
    }
}

fn check_point(spec: &IndicatorSpec<'_>, j: usize, y_minus_j: &[f64]) -> Result<()> {
    let d = spec.base.dim();
    if j >= d {
        return Err(Error::DimensionOverflow {
            requested: j + 1,
            available: d,
        });
    }
    if y_minus_j.len() + 1 != d {
        return Err(Error::Config(format!(
            "y_{{-j}} must have {} components, got {}",
            d - 1,
            y_minus_j.len()
        )));
    }
    Ok(())
}

fn finite_or_eval_err(v: f64, at: f64) -> Result<f64> {
    if v.is_nan() {
        Err(Error::Evaluation { at })
    } else {
        Ok(v)
    }
}

/// Locates the positivity intervals of `φ(·, y_{−j}) − t` along axis `j`.
pub fn decompose(
    spec: &IndicatorSpec<'_>,
    j: usize,
    y_minus_j: &[f64],
    cfg: &RootFinderConfig,
) -> Result<IntervalDecomposition> {
    cfg.validate()?;
    check_point(spec, j, y_minus_j)?;
    let y = assemble(j, 0.0, y_minus_j);
    let line = restrict(spec.base, j, &y);
    decompose_line(line.as_ref(), spec.threshold, cfg)
}

/// [`decompose`] for an already restricted function.
pub fn decompose_line(
    line: &dyn LineFunction,
    t: f64,
    cfg: &RootFinderConfig,
) -> Result<IntervalDecomposition> {
    let big_l = cfg.scan_halfwidth;
    let n = cfg.scan_points;
    let g = |x: f64| line.value(x) - t;

    let grid: Vec<f64> = (0..n)
        .map(|i| -big_l + 2.0 * big_l * i as f64 / (n - 1) as f64)
        .collect();
    let slopes: Vec<f64> = grid
        .iter()
        .map(|&x| finite_or_eval_err(line.d1(x), x))
        .collect::<Result<_>>()?;

    // nodes = grid plus the turning points between grid nodes
    let mut nodes = Vec::with_capacity(n + 8);
    for i in 0..n {
        nodes.push(grid[i]);
        if i + 1 < n && slopes[i] * slopes[i + 1] < 0.0 {
            let turn = safeguarded_newton(
                |x| line.d1(x),
                |x| line.d2(x),
                grid[i],
                grid[i + 1],
                slopes[i],
                slopes[i + 1],
                0.0,
                expanded_budget(cfg),
            )?;
            if turn > grid[i] && turn < grid[i + 1] {
                nodes.push(turn);
            }
        }
    }
    let values: Vec<f64> = nodes
        .iter()
        .map(|&x| finite_or_eval_err(g(x), x))
        .collect::<Result<_>>()?;

    let mut roots = Vec::new();
    for i in 0..nodes.len() {
        if values[i] == 0.0 {
            roots.push(nodes[i]);
        }
        if i + 1 < nodes.len() && values[i] * values[i + 1] < 0.0 {
            roots.push(safeguarded_newton(
                g,
                |x| line.d1(x),
                nodes[i],
                nodes[i + 1],
                values[i],
                values[i + 1],
                cfg.root_tol,
                cfg.max_iter,
            )?);
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup();

    let mut breaks = Vec::with_capacity(roots.len() + 2);
    breaks.push(-big_l);
    breaks.extend(roots.iter().copied().filter(|&r| r > -big_l && r < big_l));
    breaks.push(big_l);

    // positive segments, merged across tangential touches
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let mid = 0.5 * (a + b);
        if finite_or_eval_err(g(mid), mid)? > 0.0 {
            match intervals.last_mut() {
                Some(last) if last.1 == a => last.1 = b,
                _ => intervals.push((a, b)),
            }
        }
    }
    if let Some(first) = intervals.first_mut() {
        if first.0 == -big_l {
            first.0 = f64::NEG_INFINITY;
        }
    }
    if let Some(last) = intervals.last_mut() {
        if last.1 == big_l {
            last.1 = f64::INFINITY;
        }
    }
    Ok(IntervalDecomposition::from_intervals(intervals))
}

/// `(P_j f_t)(y_{−j})` for the jump flavour, in `[0, 1]`.
pub fn preintegrate_jump(
    spec: &IndicatorSpec<'_>,
    j: usize,
    y_minus_j: &[f64],
    cfg: &RootFinderConfig,
) -> Result<f64> {
    Ok(decompose(spec, j, y_minus_j, cfg)?.mass())
}

/// `(P_j f)(y_{−j})` for the kink flavour `max(φ − t, 0)`.
///
/// Each positivity interval is integrated with adaptive Gauss–Kronrod;
/// unbounded ends are cut where `(φ − t)ρ` falls below `1e−16` of the
/// largest sampled integrand value.
pub fn preintegrate_kink(
    spec: &IndicatorSpec<'_>,
    j: usize,
    y_minus_j: &[f64],
    cfg: &RootFinderConfig,
) -> Result<f64> {
    let dec = decompose(spec, j, y_minus_j, cfg)?;
    let y = assemble(j, 0.0, y_minus_j);
    let line = restrict(spec.base, j, &y);
    let t = spec.threshold;
    let integrand = |x: f64| (line.value(x) - t).max(0.0) * pdf(x);
    let big_l = cfg.scan_halfwidth;

    let scale = (0..=64)
        .map(|i| integrand(-big_l + 2.0 * big_l * i as f64 / 64.0))
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let cutoff = |start: f64, dir: f64| {
        let mut x = start;
        for _ in 0..40 {
            if integrand(x) < 1e-16 * scale {
                break;
            }
            x = dir * (x.abs() * 1.25).max(1.0);
        }
        x
    };

    let mut total = 0.0;
    for &(a, b) in &dec.intervals {
        let lo = if a.is_finite() { a } else { cutoff(-big_l, -1.0) };
        let hi = if b.is_finite() { b } else { cutoff(big_l, 1.0) };
        let q = quadrature::integrate(integrand, lo, hi, KINK_ABS_TOL, KINK_REL_TOL, KINK_MAX_PANELS)?;
        total += q.value;
    }
    Ok(total.max(0.0))
}

/// Dispatches on the flavour of `spec`.
pub fn preintegrate(
    spec: &IndicatorSpec<'_>,
    j: usize,
    y_minus_j: &[f64],
    cfg: &RootFinderConfig,
) -> Result<f64> {
    match spec.flavor {
        Flavor::Jump => preintegrate_jump(spec, j, y_minus_j, cfg),
        Flavor::Kink => preintegrate_kink(spec, j, y_minus_j, cfg),
    }
}

/// Jump preintegral for `φ` strictly convex along axis `j`.
///
/// Locates the line minimum `y_j*`; returns 1 if `φ(y_j*) ≥ t`, otherwise
/// `Φ(ξ_a) + 1 − Φ(ξ_b)` for the two crossings around it. When `φ` is still
/// decreasing below `t` beyond the scan range the minimum lies outside the
/// normal mass, and that side has no crossing (the monotone case).
pub fn preintegrate_convex(
    spec: &IndicatorSpec<'_>,
    j: usize,
    y_minus_j: &[f64],
    cfg: &RootFinderConfig,
) -> Result<f64> {
    cfg.validate()?;
    check_point(spec, j, y_minus_j)?;
    let y = assemble(j, 0.0, y_minus_j);
    let line = restrict(spec.base, j, &y);
    convex_line(line.as_ref(), spec.threshold, cfg)
}

/// [`preintegrate_convex`] for an already restricted function.
pub fn convex_line(line: &dyn LineFunction, t: f64, cfg: &RootFinderConfig) -> Result<f64> {
    let g = |x: f64| line.value(x) - t;
    let dg = |x: f64| line.d1(x);

    let x0 = 0.0;
    let s0 = finite_or_eval_err(dg(x0), x0)?;
    let (centre, open_side) = if s0 == 0.0 {
        (Stationary::At(x0), None)
    } else {
        descend(line, t, x0, -s0.signum(), cfg)?
    };

    let centre = match centre {
        Stationary::At(x) => {
            let curvature = line.d2(x);
            if !(curvature > 0.0) {
                return Err(Error::ConvexityViolation { at: x, d2: curvature });
            }
            if finite_or_eval_err(g(x), x)? >= 0.0 {
                return Ok(1.0);
            }
            x
        }
        Stationary::Beyond(x) => x,
    };

    let left = if open_side == Some(-1.0) {
        f64::NEG_INFINITY
    } else {
        ascend_to_root(line, t, centre, -1.0, cfg)?
    };
    let right = if open_side == Some(1.0) {
        f64::INFINITY
    } else {
        ascend_to_root(line, t, centre, 1.0, cfg)?
    };
    Ok((cdf(left) + sf(right)).clamp(0.0, 1.0))
}

enum Stationary {
    At(f64),
    /// A point below the level beyond the scan range, reached while still
    /// descending.
    Beyond(f64),
}

/// Walks downhill from `x0` in direction `dir` with doubling steps until the
/// slope changes sign, then refines the turning point.
fn descend(
    line: &dyn LineFunction,
    t: f64,
    x0: f64,
    dir: f64,
    cfg: &RootFinderConfig,
) -> Result<(Stationary, Option<f64>)> {
    let mut prev = x0;
    let mut prev_slope = line.d1(x0);
    let mut step = 1.0;
    for _ in 0..MAX_DOUBLINGS {
        let x = x0 + dir * step;
        let slope = finite_or_eval_err(line.d1(x), x)?;
        if slope == 0.0 {
            return Ok((Stationary::At(x), None));
        }
        if slope.signum() != prev_slope.signum() {
            let (lo, hi, s_lo, s_hi) = if dir > 0.0 {
                (prev, x, prev_slope, slope)
            } else {
                (x, prev, slope, prev_slope)
            };
            let turn = safeguarded_newton(
                |z| line.d1(z),
                |z| line.d2(z),
                lo,
                hi,
                s_lo,
                s_hi,
                0.0,
                expanded_budget(cfg),
            )?;
            return Ok((Stationary::At(turn), None));
        }
        if x.abs() > cfg.scan_halfwidth && finite_or_eval_err(line.value(x), x)? < t {
            return Ok((Stationary::Beyond(x), Some(dir)));
        }
        prev = x;
        prev_slope = slope;
        step *= 2.0;
    }
    Err(Error::BracketExpansion {
        from: x0,
        direction: dir,
    })
}

/// From a point below the level, walks in direction `dir` until `φ > t` and
/// refines the crossing.
fn ascend_to_root(
    line: &dyn LineFunction,
    t: f64,
    from: f64,
    dir: f64,
    cfg: &RootFinderConfig,
) -> Result<f64> {
    let g = |x: f64| line.value(x) - t;
    let mut prev = from;
    let mut g_prev = finite_or_eval_err(g(from), from)?;
    let mut step = 1.0;
    for _ in 0..MAX_DOUBLINGS {
        let x = from + dir * step;
        let gx = finite_or_eval_err(g(x), x)?;
        if gx > 0.0 {
            let (lo, hi, g_lo, g_hi) = if dir > 0.0 {
                (prev, x, g_prev, gx)
            } else {
                (x, prev, gx, g_prev)
            };
            return safeguarded_newton(g, |z| line.d1(z), lo, hi, g_lo, g_hi, cfg.root_tol, expanded_budget(cfg));
        }
        prev = x;
        g_prev = gx;
        step *= 2.0;
    }
    Err(Error::BracketExpansion {
        from,
        direction: dir,
    })
}
