//! Batch experiments behind the command-line tool, with their CSV formats.
//!
//! Convergence CSV: header `method,N,R,estimate,stderr,evals,wall_seconds`,
//! one row per (method, N) in the requested order, then one
//! `#rate,<method>,<rate>` row per method. A failed cell ends the file with
//! `#error,<method>,<N>,<message>`.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use crate::analytic::{oracle_kink_preintegral, oracle_preintegral, AnalyticExample};
use crate::asian::{
    build_factorization, price_digital_asian, turning_point, AsianAverage, FactorizationKind,
    MarketParams, Method,
};
use crate::error::{Error, Result};
use crate::integrand::{without, Flavor, IndicatorSpec, Integrand};
use crate::preintegrate::{preintegrate, RootFinderConfig};
use crate::qmc::{convergence_rate, Estimate, EstimatorConfig, GeneratingVector};
use crate::singularity::{
    check_sqrt_conditions, default_h_grid, estimate_exponent, find_level_point, probe_curvature,
    psi_gradient, Conditions, Side,
};
use crate::roots::safeguarded_newton;

pub const CONVERGENCE_HEADER: &str = "method,N,R,estimate,stderr,evals,wall_seconds";
pub const EXAMPLE_HEADER: &str = "coord,value,oracle";
pub const SINGULARITY_HEADER: &str = "t,location,exponent,amplitude,residual,predicted_amplitude,\
d1_zero,d2_nonzero,grad_nonzero,grad_dpsi_nonzero,not_parallel,status";

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

/// Shortest round-trip representation, with `-0` written as `0`.
fn num(x: f64) -> String {
    (x + 0.0).to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExampleRow {
    pub coord: f64,
    pub value: f64,
    pub oracle: Option<f64>,
}

/// Samples `P_j f_t` of an analytic example at `samples` equally spaced
/// coordinates of `[lo, hi]` (the remaining coordinate of the 2-D example),
/// next to the closed form where one is known.
pub fn cmd_example(
    id: AnalyticExample,
    axis: usize,
    flavor: Flavor,
    t: f64,
    range: (f64, f64),
    samples: usize,
) -> Result<Vec<ExampleRow>> {
    if axis > 1 {
        return Err(Error::DimensionOverflow {
            requested: axis + 1,
            available: 2,
        });
    }
    let (lo, hi) = range;
    if samples == 0 || !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::Config(format!(
            "invalid sampling range [{lo}, {hi}] with {samples} samples"
        )));
    }
    let spec = IndicatorSpec {
        base: &id,
        threshold: t,
        flavor,
    };
    let cfg = RootFinderConfig::default();
    (0..samples)
        .map(|i| {
            let coord = if samples == 1 {
                lo
            } else {
                lo + (hi - lo) * i as f64 / (samples - 1) as f64
            };
            let value = preintegrate(&spec, axis, &[coord], &cfg)?;
            let oracle = match flavor {
                Flavor::Jump => oracle_preintegral(id, axis, t, coord).ok(),
                Flavor::Kink if id == AnalyticExample::Parabola && axis == 0 => {
                    Some(oracle_kink_preintegral(t, coord))
                }
                Flavor::Kink => None,
            };
            Ok(ExampleRow {
                coord,
                value,
                oracle,
            })
        })
        .collect()
}

pub fn write_example_csv<W: Write>(mut w: W, rows: &[ExampleRow]) -> io::Result<()> {
    writeln!(w, "{EXAMPLE_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{},{}", num(r.coord), num(r.value), opt(r.oracle))?;
    }
    w.flush()
}

pub fn save_example_csv(path: &Path, rows: &[ExampleRow]) -> Result<()> {
    write_example_csv(create(path)?, rows).map_err(io_err(path))
}

/// What to probe for singularities.
#[derive(Debug, Clone, PartialEq)]
pub enum SingularityTarget {
    /// An analytic example, preintegrated along `axis`, probed at the
    /// critical points `y^(t)` for each `t` in `t_grid`.
    Analytic {
        id: AnalyticExample,
        axis: usize,
        flavor: Flavor,
        t_grid: Vec<f64>,
    },
    /// The average-price function under PCA, preintegrated along `axis`, with
    /// the strike placed at the turning point through `y_{−j} = 0`.
    Option { params: MarketParams, axis: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularityRow {
    pub t: f64,
    /// Probe-line coordinate of the critical point.
    pub location: Option<f64>,
    pub exponent: Option<f64>,
    pub amplitude: Option<f64>,
    pub residual: Option<f64>,
    /// Square-root amplitude implied by the curvature of the level set.
    pub predicted_amplitude: Option<f64>,
    pub conds: Option<Conditions>,
    pub status: String,
}

impl SingularityRow {
    fn failed(t: f64, conds: Option<Conditions>, err: &Error) -> Self {
        Self {
            t,
            location: None,
            exponent: None,
            amplitude: None,
            residual: None,
            predicted_amplitude: None,
            conds,
            status: format!("error: {err}").replace(',', ";"),
        }
    }
}

/// A known critical point of each example along axis 0.
fn seed_point(id: AnalyticExample) -> [f64; 2] {
    match id {
        AnalyticExample::Hyperbola => [0.0, 1.0],
        _ => [0.0, 0.0],
    }
}

/// Critical point for level `t`: the seed itself if it already lies on the
/// level, otherwise the Gauss–Newton continuation from it.
fn level_point(f: &dyn Integrand, seed: &[f64], j: usize, t: f64) -> Result<Vec<f64>> {
    if f.eval(seed) == t && f.d1(j, seed) == 0.0 {
        return Ok(seed.to_vec());
    }
    find_level_point(f, seed, j, t)
}

fn probe_row(f: &dyn Integrand, y: &[f64], j: usize, t: f64, flavor: Flavor) -> SingularityRow {
    let cp = check_sqrt_conditions(f, y, j);
    let rest = without(j, y);
    let grad_rest = without(j, &cp.gradient);
    let norm = grad_rest.iter().map(|v| v * v).sum::<f64>().sqrt();
    let dir: Vec<f64> = if norm > 0.0 {
        grad_rest.iter().map(|v| v / norm).collect()
    } else {
        let mut e = vec![0.0; rest.len()];
        e[0] = 1.0;
        e
    };
    // without curvature along the axis there is no square-root prediction
    let curvature = probe_curvature(f, y, j, &dir)
        .ok()
        .filter(|c| c.zeta2 != 0.0 && c.c.is_finite());
    let side = curvature.map_or(Side::Both, |c| c.side);
    let s_star: f64 = rest.iter().zip(&dir).map(|(a, b)| a * b).sum();
    let spec = IndicatorSpec {
        base: f,
        threshold: t,
        flavor,
    };
    let cfg = RootFinderConfig::default();
    let g = |s: f64| {
        let point: Vec<f64> = rest.iter().zip(&dir).map(|(o, u)| o + (s - s_star) * u).collect();
        preintegrate(&spec, j, &point, &cfg)
    };
    // square-root behaviour sets in once c·√h ≪ 1, c² = 2/|ζ″|
    let scale = curvature.map_or(1.0, |c| (0.5 * c.zeta2.abs()).min(1.0));
    let grid: Vec<f64> = default_h_grid().iter().map(|h| h * scale).collect();
    match estimate_exponent(g, s_star, side, &grid) {
        Ok(rep) => SingularityRow {
            t,
            location: Some(s_star),
            exponent: Some(rep.exponent),
            amplitude: Some(rep.amplitude),
            residual: Some(rep.residual),
            predicted_amplitude: match flavor {
                Flavor::Jump => curvature.map(|c| c.amplitude),
                Flavor::Kink => None,
            },
            conds: Some(cp.conds),
            status: "ok".into(),
        },
        Err(e) => SingularityRow::failed(t, Some(cp.conds), &e),
    }
}

/// Locates critical points, checks the singularity hypotheses there and fits
/// the local exponent of the preintegral along a probe line. Failures are
/// reported in the row status.
pub fn cmd_singularity(target: &SingularityTarget) -> Result<Vec<SingularityRow>> {
    match target {
        SingularityTarget::Analytic {
            id,
            axis,
            flavor,
            t_grid,
        } => {
            if *axis > 1 {
                return Err(Error::DimensionOverflow {
                    requested: axis + 1,
                    available: 2,
                });
            }
            let mut seed = seed_point(*id);
            seed.swap(0, *axis);
            Ok(t_grid
                .iter()
                .map(|&t| match level_point(id, &seed, *axis, t) {
                    Ok(y) => probe_row(id, &y, *axis, t, *flavor),
                    Err(e) => SingularityRow::failed(t, None, &e),
                })
                .collect())
        }
        SingularityTarget::Option { params, axis } => {
            if *axis >= params.d || params.d < 2 {
                return Err(Error::Config(format!(
                    "axis {} invalid for d = {}",
                    axis + 1,
                    params.d
                )));
            }
            let fact = build_factorization(params, FactorizationKind::Pca)?;
            let phi = AsianAverage::new(params, &fact)?;
            let y = centred_turning_point(&phi, *axis)?;
            let t = phi.eval(&y);
            Ok(vec![probe_row(&phi, &y, *axis, t, Flavor::Jump)])
        }
    }
}

/// A critical point of `φ` along axis `j` with `y_j* = 0`, where the normal
/// weight of the singularity is largest. It is sought on the line
/// `y = a·e_k` through the first other axis `k`; if `∂φ/∂y_j` does not change
/// sign there, the turning point above `y_{−j} = 0` is used instead.
pub fn centred_turning_point(phi: &dyn Integrand, j: usize) -> Result<Vec<f64>> {
    let d = phi.dim();
    let k = if j == 0 { 1 } else { 0 };
    let at = |a: f64| {
        let mut y = vec![0.0; d];
        y[k] = a;
        y
    };
    let slope = |a: f64| phi.d1(j, &at(a));
    let s0 = slope(0.0);
    let mut bracket = None;
    'search: for dir in [1.0, -1.0] {
        let (mut prev, mut step) = (0.0, 1.0);
        for _ in 0..8 {
            let a = dir * step;
            let s = slope(a);
            if s.signum() != s0.signum() && s.is_finite() {
                bracket = Some(if dir > 0.0 { (prev, a) } else { (a, prev) });
                break 'search;
            }
            prev = a;
            step *= 2.0;
        }
    }
    match bracket {
        Some((lo, hi)) => {
            let a = safeguarded_newton(
                slope,
                |a| psi_gradient(phi, &at(a), j)[k],
                lo,
                hi,
                slope(lo),
                slope(hi),
                1e-13,
                200,
            )?;
            Ok(at(a))
        }
        None => {
            let mut y = vec![0.0; d];
            y[j] = turning_point(phi, j, &y)?;
            Ok(y)
        }
    }
}

pub fn write_singularity_csv<W: Write>(mut w: W, rows: &[SingularityRow]) -> io::Result<()> {
    writeln!(w, "{SINGULARITY_HEADER}")?;
    for r in rows {
        let flags = match r.conds {
            Some(c) => format!(
                "{},{},{},{},{}",
                c.d1_zero, c.d2_nonzero, c.grad_nonzero, c.grad_dpsi_nonzero, c.not_parallel
            ),
            None => ",,,,".into(),
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            num(r.t),
            opt(r.location),
            opt(r.exponent),
            opt(r.amplitude),
            opt(r.residual),
            opt(r.predicted_amplitude),
            flags,
            r.status
        )?;
    }
    w.flush()
}

pub fn save_singularity_csv(path: &Path, rows: &[SingularityRow]) -> Result<()> {
    write_singularity_csv(create(path)?, rows).map_err(io_err(path))
}

/// Plain-text summary of singularity rows.
pub fn singularity_report(rows: &[SingularityRow]) -> String {
    let mut out = String::new();
    for r in rows {
        let line = match (r.location, r.exponent, r.amplitude) {
            (Some(loc), Some(e), Some(a)) => {
                let mut s = format!("t = {:+.4}: location {:+.6}, exponent {:.4}, amplitude {:.5}", r.t, loc, e, a);
                if let Some(p) = r.predicted_amplitude {
                    s.push_str(&format!(" (predicted {p:.5})"));
                }
                if let Some(c) = r.conds {
                    s.push_str(if c.square_root() {
                        ", square-root hypotheses hold"
                    } else {
                        ", square-root hypotheses fail"
                    });
                }
                s
            }
            _ => format!("t = {:+.4}: {}", r.t, r.status),
        };
        out.push_str(&line);
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeConfig {
    pub params: MarketParams,
    pub factorization: FactorizationKind,
    pub methods: Vec<Method>,
    pub n_list: Vec<usize>,
    pub shifts: usize,
    pub seed: u64,
}

impl ConvergeConfig {
    /// 16 dates, `N = 2^10..2^14`, 16 shifts, all four methods under PCA.
    pub fn desk() -> Self {
        Self {
            params: MarketParams::reference().with_dates(16),
            factorization: FactorizationKind::Pca,
            methods: vec![
                Method::Mc,
                Method::PlainQmc,
                Method::PreintQmc(0),
                Method::PreintQmc(1),
            ],
            n_list: (10..=14).map(|k| 1 << k).collect(),
            shifts: 16,
            seed: 20220427,
        }
    }

    /// 256 dates and `N = 2^10..2^19`.
    pub fn paper_scale() -> Self {
        Self {
            params: MarketParams::reference(),
            n_list: (10..=19).map(|k| 1 << k).collect(),
            ..Self::desk()
        }
    }

    pub fn validate(&self, z: &GeneratingVector) -> Result<()> {
        self.params.validate()?;
        if self.methods.is_empty() {
            return Err(Error::Config("no methods given".into()));
        }
        if self.n_list.is_empty() {
            return Err(Error::Config("no point counts given".into()));
        }
        if !self.n_list.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("N list must be strictly increasing".into()));
        }
        for m in &self.methods {
            if let Method::PreintQmc(j) = m {
                if self.factorization != FactorizationKind::Pca || *j > 1 {
                    return Err(Error::Config(format!(
                        "{m} is available for axes 1 and 2 under the pca factorization only"
                    )));
                }
            }
            for &n in &self.n_list {
                self.estimator(*m, n).validate(z.n_max)?;
            }
            if m.cubature_dim(self.params.d) > z.dim() && *m != Method::Mc {
                return Err(Error::DimensionOverflow {
                    requested: m.cubature_dim(self.params.d),
                    available: z.dim(),
                });
            }
        }
        Ok(())
    }

    fn estimator(&self, m: Method, n: usize) -> EstimatorConfig {
        EstimatorConfig {
            n,
            shifts: self.shifts,
            seed: self.seed,
            dim: m.cubature_dim(self.params.d),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub method: String,
    pub n: usize,
    pub r: usize,
    pub estimate: f64,
    pub stderr: f64,
    pub evals: u64,
    pub wall_seconds: f64,
}

impl ConvergenceRecord {
    fn new(method: Method, n: usize, r: usize, e: &Estimate, wall_seconds: f64) -> Self {
        Self {
            method: method.to_string(),
            n,
            r,
            estimate: e.value,
            stderr: e.stderr,
            evals: e.evals,
            wall_seconds,
        }
    }
}

#[derive(Debug, Default)]
pub struct ConvergenceRun {
    pub records: Vec<ConvergenceRecord>,
    /// `(method, rate)` for methods with at least three records.
    pub rates: Vec<(String, f64)>,
    /// The first failed cell, `(method, N, error)`; later cells are skipped.
    pub failure: Option<(String, usize, Error)>,
}

impl ConvergenceRun {
    pub fn rate(&self, method: &str) -> Option<f64> {
        self.rates.iter().find(|r| r.0 == method).map(|r| r.1)
    }

    pub fn records_for<'a>(&'a self, method: &'a str) -> impl Iterator<Item = &'a ConvergenceRecord> + 'a {
        self.records.iter().filter(move |r| r.method == method)
    }
}

/// Prices the option for every (method, N) cell. Cells run one after the
/// other, each parallel internally, so `wall_seconds` is a per-cell time.
pub fn run_converge(cfg: &ConvergeConfig, z: &GeneratingVector) -> Result<ConvergenceRun> {
    cfg.validate(z)?;
    let fact = build_factorization(&cfg.params, cfg.factorization)?;
    let mut run = ConvergenceRun::default();
    'outer: for &m in &cfg.methods {
        for &n in &cfg.n_list {
            let start = Instant::now();
            match price_digital_asian(&cfg.params, &fact, m, &cfg.estimator(m, n), z) {
                Ok(e) => run.records.push(ConvergenceRecord::new(
                    m,
                    n,
                    cfg.shifts,
                    &e,
                    start.elapsed().as_secs_f64(),
                )),
                Err(e) => {
                    run.failure = Some((m.to_string(), n, e));
                    break 'outer;
                }
            }
        }
    }
    for m in &cfg.methods {
        let name = m.to_string();
        let recs: Vec<(usize, f64)> = run.records_for(&name).map(|r| (r.n, r.stderr)).collect();
        if recs.len() >= 3 {
            if let Ok(rate) = convergence_rate(&recs) {
                run.rates.push((name, rate));
            }
        }
    }
    Ok(run)
}

pub fn write_convergence_csv<W: Write>(mut w: W, run: &ConvergenceRun) -> io::Result<()> {
    writeln!(w, "{CONVERGENCE_HEADER}")?;
    for r in &run.records {
        writeln!(
            w,
            "{},{},{},{},{},{},{:.6}",
            r.method,
            r.n,
            r.r,
            num(r.estimate),
            num(r.stderr),
            r.evals,
            r.wall_seconds
        )?;
    }
    for (m, rate) in &run.rates {
        writeln!(w, "#rate,{m},{}", num(*rate))?;
    }
    if let Some((m, n, e)) = &run.failure {
        writeln!(w, "#error,{m},{n},{}", e.to_string().replace(['\n', ','], " "))?;
    }
    w.flush()
}

/// [`run_converge`] followed by writing the CSV to `out`. If a cell fails,
/// the rows computed so far and an error marker are written before the error
/// is returned.
pub fn cmd_converge(cfg: &ConvergeConfig, z: &GeneratingVector, out: &Path) -> Result<ConvergenceRun> {
    cfg.validate(z)?;
    let file = create(out)?;
    let mut run = run_converge(cfg, z)?;
    write_convergence_csv(file, &run).map_err(io_err(out))?;
    match run.failure.take() {
        Some((_, _, e)) => Err(e),
        None => Ok(run),
    }
}
