//! Digital Asian call under Black–Scholes.
//!
//! With `d` equally spaced monitoring dates and the Brownian path written as
//! `W = A·y`, `AAᵀ = Σ`, `Σ_{kl} = min(k, l)·T/d`, the discrete average is
//!
//! `φ(y) = (S0/d) Σ_k exp((r − σ²/2)·kT/d + σ·A_k·y)`
//!
//! and the option pays `ind(φ(y) − K)` at `T`. `φ` is strictly convex along
//! every axis; it is monotone along axis `j` exactly when column `j` of `A`
//! has no entries of opposite sign.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::integrand::{assemble, restrict, Integrand, LineFunction};
use crate::preintegrate::{convex_line, RootFinderConfig};
use crate::qmc::{integrate_mc, integrate_qmc, Estimate, EstimatorConfig, GeneratingVector};
use crate::roots::safeguarded_newton;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    pub s0: f64,
    pub strike: f64,
    pub maturity: f64,
    pub rate: f64,
    pub sigma: f64,
    /// Number of monitoring dates.
    pub d: usize,
}

impl MarketParams {
    /// `S0 = 100`, `K = 110`, `T = 1`, `r = 0.1`, `σ = 0.1`, 256 dates.
    pub fn reference() -> Self {
        Self {
            s0: 100.0,
            strike: 110.0,
            maturity: 1.0,
            rate: 0.1,
            sigma: 0.1,
            d: 256,
        }
    }

    pub fn with_dates(self, d: usize) -> Self {
        Self { d, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("s0", self.s0),
            ("strike", self.strike),
            ("maturity", self.maturity),
            ("sigma", self.sigma),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !self.rate.is_finite() {
            return Err(Error::Config(format!("rate must be finite, got {}", self.rate)));
        }
        if self.d == 0 {
            return Err(Error::Config("at least one monitoring date is required".into()));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.maturity / self.d as f64
    }

    pub fn discount(&self) -> f64 {
        (-self.rate * self.maturity).exp()
    }
}

impl Default for MarketParams {
    fn default() -> Self {
        Self::reference()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FactorizationKind {
    Standard,
    BrownianBridge,
    Pca,
}

impl FactorizationKind {
    pub const ALL: [FactorizationKind; 3] = [Self::Standard, Self::BrownianBridge, Self::Pca];
}

impl fmt::Display for FactorizationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Standard => "standard",
            Self::BrownianBridge => "bb",
            Self::Pca => "pca",
        })
    }
}

impl FromStr for FactorizationKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "standard" | "cholesky" => Ok(Self::Standard),
            "bb" | "bridge" | "brownian-bridge" => Ok(Self::BrownianBridge),
            "pca" => Ok(Self::Pca),
            _ => Err(Error::Config(format!(
                "unknown factorization {s:?} (expected standard, bb or pca)"
            ))),
        }
    }
}

/// Brownian covariance `Σ_{kl} = min(k, l)·T/d`, `k, l = 1..d`.
pub fn covariance(params: &MarketParams) -> DMatrix<f64> {
    let dt = params.dt();
    DMatrix::from_fn(params.d, params.d, |k, l| (k.min(l) + 1) as f64 * dt)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceFactorization {
    pub kind: FactorizationKind,
    pub a: DMatrix<f64>,
}

impl CovarianceFactorization {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn entry(&self, k: usize, j: usize) -> f64 {
        self.a[(k, j)]
    }
}

pub fn build_factorization(
    params: &MarketParams,
    kind: FactorizationKind,
) -> Result<CovarianceFactorization> {
    params.validate()?;
    let a = match kind {
        FactorizationKind::Standard => standard(params),
        FactorizationKind::BrownianBridge => brownian_bridge(params),
        FactorizationKind::Pca => pca(params)?,
    };
    Ok(CovarianceFactorization { kind, a })
}

fn standard(params: &MarketParams) -> DMatrix<f64> {
    let s = params.dt().sqrt();
    DMatrix::from_fn(params.d, params.d, |k, j| if k >= j { s } else { 0.0 })
}

/// Bridge construction on the grid `0..=d`: the endpoint first, then the
/// rounded-down midpoint of every interval between already fixed indices,
/// level by level. Each new value is the linear interpolant of its
/// neighbours plus independent noise of the conditional variance.
fn brownian_bridge(params: &MarketParams) -> DMatrix<f64> {
    let d = params.d;
    let dt = params.dt();
    // rows[k] expresses W(k·dt) in terms of y
    let mut rows = vec![vec![0.0; d]; d + 1];
    rows[d][0] = params.maturity.sqrt();
    let mut col = 1;
    let mut queue = VecDeque::from([(0usize, d)]);
    while let Some((l, r)) = queue.pop_front() {
        if r - l < 2 {
            continue;
        }
        let m = (l + r) / 2;
        let (wl, wr) = ((r - m) as f64 / (r - l) as f64, (m - l) as f64 / (r - l) as f64);
        let sd = ((m - l) as f64 * (r - m) as f64 / (r - l) as f64 * dt).sqrt();
        let mut row: Vec<f64> = rows[l].iter().zip(&rows[r]).map(|(a, b)| wl * a + wr * b).collect();
        row[col] = sd;
        rows[m] = row;
        col += 1;
        queue.push_back((l, m));
        queue.push_back((m, r));
    }
    debug_assert_eq!(col, d);
    DMatrix::from_fn(d, d, |k, j| rows[k + 1][j])
}

fn pca(params: &MarketParams) -> Result<DMatrix<f64>> {
    let d = params.d;
    let sigma = covariance(params);
    let eig = SymmetricEigen::try_new(sigma, f64::EPSILON, 0)
        .ok_or_else(|| Error::Factorization("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut a = DMatrix::zeros(d, d);
    for (j, &src) in order.iter().enumerate() {
        let lambda = eig.eigenvalues[src];
        if !(lambda > 0.0) {
            return Err(Error::Factorization(format!(
                "non-positive eigenvalue {lambda:e} of a positive definite matrix"
            )));
        }
        let v = eig.eigenvectors.column(src);
        let sign = if v[0] < 0.0 { -1.0 } else { 1.0 };
        let s = sign * lambda.sqrt();
        for k in 0..d {
            a[(k, j)] = s * v[k];
        }
    }
    Ok(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotonicity {
    MonotoneIncreasing,
    NotMonotone,
}

/// Axis `j` is monotone increasing iff column `j` is nonnegative and not zero.
pub fn classify_monotonicity(fact: &CovarianceFactorization) -> Vec<Monotonicity> {
    fact.a
        .column_iter()
        .map(|c| {
            if c.iter().all(|&v| v >= 0.0) && c.iter().any(|&v| v > 0.0) {
                Monotonicity::MonotoneIncreasing
            } else {
                Monotonicity::NotMonotone
            }
        })
        .collect()
}

/// The average price `φ` as an [`Integrand`].
pub struct AsianAverage<'a> {
    fact: &'a CovarianceFactorization,
    sigma: f64,
    /// `ln(S0/d) + (r − σ²/2)·kT/d`
    drift: Vec<f64>,
}

impl<'a> AsianAverage<'a> {
    pub fn new(params: &MarketParams, fact: &'a CovarianceFactorization) -> Result<Self> {
        params.validate()?;
        if fact.dim() != params.d {
            return Err(Error::Config(format!(
                "factorization has dimension {}, expected {}",
                fact.dim(),
                params.d
            )));
        }
        let dt = params.dt();
        let mu = params.rate - 0.5 * params.sigma * params.sigma;
        let log_scale = (params.s0 / params.d as f64).ln();
        let drift = (1..=params.d).map(|k| log_scale + mu * k as f64 * dt).collect();
        Ok(Self {
            fact,
            sigma: params.sigma,
            drift,
        })
    }

    /// Exponents `drift_k + σ·A_k·y`.
    fn exponents(&self, y: &[f64]) -> Vec<f64> {
        let a = &self.fact.a;
        (0..self.drift.len())
            .map(|k| {
                let dot: f64 = y.iter().enumerate().map(|(j, &yj)| a[(k, j)] * yj).sum();
                self.drift[k] + self.sigma * dot
            })
            .collect()
    }

    fn weighted(&self, j: usize, y: &[f64], power: i32) -> f64 {
        let s = self.sigma;
        self.exponents(y)
            .iter()
            .enumerate()
            .map(|(k, e)| (s * self.fact.a[(k, j)]).powi(power) * e.exp())
            .sum()
    }
}

impl Integrand for AsianAverage<'_> {
    fn dim(&self) -> usize {
        self.drift.len()
    }

    fn eval(&self, y: &[f64]) -> f64 {
        self.exponents(y).iter().map(|e| e.exp()).sum()
    }

    fn d1(&self, j: usize, y: &[f64]) -> f64 {
        self.weighted(j, y, 1)
    }

    fn d2(&self, j: usize, y: &[f64]) -> f64 {
        self.weighted(j, y, 2)
    }

    fn line(&self, j: usize, y: &[f64]) -> Option<Box<dyn LineFunction + '_>> {
        let mut rest = y.to_vec();
        rest[j] = 0.0;
        let base = self.exponents(&rest);
        let coef = (0..base.len()).map(|k| self.sigma * self.fact.a[(k, j)]).collect();
        Some(Box::new(AsianLine { base, coef }))
    }
}

/// `x ↦ Σ_k exp(base_k + coef_k·x)`
struct AsianLine {
    base: Vec<f64>,
    coef: Vec<f64>,
}

impl AsianLine {
    fn moment(&self, x: f64, power: i32) -> f64 {
        self.base
            .iter()
            .zip(&self.coef)
            .map(|(b, c)| c.powi(power) * (b + c * x).exp())
            .sum()
    }
}

impl LineFunction for AsianLine {
    fn value(&self, x: f64) -> f64 {
        self.moment(x, 0)
    }
    fn d1(&self, x: f64) -> f64 {
        self.moment(x, 1)
    }
    fn d2(&self, x: f64) -> f64 {
        self.moment(x, 2)
    }
}

pub fn phi_asian(params: &MarketParams, fact: &CovarianceFactorization, y: &[f64]) -> Result<f64> {
    let phi = AsianAverage::new(params, fact)?;
    check_len(params, y)?;
    Ok(phi.eval(y))
}

pub fn phi_asian_d1(params: &MarketParams, fact: &CovarianceFactorization, j: usize, y: &[f64]) -> Result<f64> {
    let phi = AsianAverage::new(params, fact)?;
    check_axis(params, j, y)?;
    Ok(phi.d1(j, y))
}

pub fn phi_asian_d2(params: &MarketParams, fact: &CovarianceFactorization, j: usize, y: &[f64]) -> Result<f64> {
    let phi = AsianAverage::new(params, fact)?;
    check_axis(params, j, y)?;
    Ok(phi.d2(j, y))
}

fn check_len(params: &MarketParams, y: &[f64]) -> Result<()> {
    if y.len() != params.d {
        return Err(Error::Config(format!("y must have {} components, got {}", params.d, y.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("y must be finite".into()));
    }
    Ok(())
}

fn check_axis(params: &MarketParams, j: usize, y: &[f64]) -> Result<()> {
    check_len(params, y)?;
    if j >= params.d {
        return Err(Error::DimensionOverflow {
            requested: j + 1,
            available: params.d,
        });
    }
    Ok(())
}

/// Minimiser of `φ` along axis `j` through `y` (the value `y[j]` is ignored),
/// by safeguarded Newton on `∂φ/∂y_j`.
pub fn turning_point(phi: &dyn Integrand, j: usize, y: &[f64]) -> Result<f64> {
    let line = restrict(phi, j, y);
    let s0 = line.d1(0.0);
    if s0 == 0.0 {
        return Ok(0.0);
    }
    let dir = -s0.signum();
    let (mut prev, mut s_prev, mut step) = (0.0, s0, 1.0);
    for _ in 0..64 {
        let x = dir * step;
        let s = line.d1(x);
        if s.is_nan() {
            return Err(Error::Evaluation { at: x });
        }
        if s.signum() != s_prev.signum() {
            let (lo, hi, s_lo, s_hi) = if dir > 0.0 { (prev, x, s_prev, s) } else { (x, prev, s, s_prev) };
            return safeguarded_newton(|x| line.d1(x), |x| line.d2(x), lo, hi, s_lo, s_hi, 1e-13, 200);
        }
        prev = x;
        s_prev = s;
        step *= 2.0;
    }
    Err(Error::BracketExpansion { from: 0.0, direction: dir })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Mc,
    PlainQmc,
    /// Preintegration along the given (zero-based) axis, then a lattice rule
    /// over the remaining `d − 1` coordinates.
    PreintQmc(usize),
}

impl Method {
    pub fn cubature_dim(&self, d: usize) -> usize {
        match self {
            Method::Mc | Method::PlainQmc => d,
            Method::PreintQmc(_) => d.saturating_sub(1),
        }
    }
}

/// Names used in CSV output: `MC`, `PlainQMC`, `Preint(k)` with one-based `k`.
impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Mc => f.write_str("MC"),
            Method::PlainQmc => f.write_str("PlainQMC"),
            Method::PreintQmc(j) => write!(f, "Preint({})", j + 1),
        }
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let axis = lower
            .strip_prefix("preint(")
            .and_then(|r| r.strip_suffix(')'))
            .or_else(|| lower.strip_prefix("preint"));
        match (lower.as_str(), axis) {
            ("mc", _) => Ok(Method::Mc),
            ("qmc" | "plainqmc", _) => Ok(Method::PlainQmc),
            (_, Some(k)) => match k.parse::<usize>() {
                Ok(k) if k >= 1 => Ok(Method::PreintQmc(k - 1)),
                _ => Err(Error::Config(format!("invalid preintegration axis in {s:?}"))),
            },
            _ => Err(Error::Config(format!(
                "unknown method {s:?} (expected mc, qmc or preint<k>)"
            ))),
        }
    }
}

/// Discounted price `e^{−rT}·E[ind(φ(Y) − K)]` and its standard error.
pub fn price_digital_asian(
    params: &MarketParams,
    fact: &CovarianceFactorization,
    method: Method,
    cfg: &EstimatorConfig,
    z: &GeneratingVector,
) -> Result<Estimate> {
    let phi = AsianAverage::new(params, fact)?;
    let expected = method.cubature_dim(params.d);
    if cfg.dim != expected {
        return Err(Error::Config(format!(
            "{method} needs a {expected}-dimensional cubature, got {}",
            cfg.dim
        )));
    }
    let k = params.strike;
    let payoff = |y: &[f64]| Ok(if phi.eval(y) > k { 1.0 } else { 0.0 });
    let raw = match method {
        Method::Mc => integrate_mc(payoff, cfg)?,
        Method::PlainQmc => integrate_qmc(payoff, cfg, z)?,
        Method::PreintQmc(j) => {
            if j >= params.d {
                return Err(Error::DimensionOverflow {
                    requested: j + 1,
                    available: params.d,
                });
            }
            let root_cfg = RootFinderConfig::default();
            let g = |y_minus_j: &[f64]| {
                let y = assemble(j, 0.0, y_minus_j);
                let line = phi.line(j, &y).expect("AsianAverage provides line restrictions");
                convex_line(line.as_ref(), k, &root_cfg)
            };
            integrate_qmc(g, cfg, z)?
        }
    };
    Ok(raw.scaled(params.discount()))
}
