//! Randomly shifted rank-1 lattice rules and plain Monte Carlo for Gaussian
//! expectations `E[g(Y)]`, `Y ~ N(0, I_s)`.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::normal::inv_cdf;
use crate::singularity::fit_line;

/// Largest point count supported by the embedded vector.
pub const DEFAULT_N_MAX: u64 = 1 << 20;

/// Replacement for unit-cube coordinates that land exactly on 0.
pub const ZERO_NUDGE: f64 = 1.0 / 18_446_744_073_709_551_616.0;

/// MC batches draw from streams offset by this amount so that they never
/// share a stream with a lattice shift of the same seed.
const MC_STREAM_OFFSET: u64 = 1 << 32;

/// Points summed per block; block sums are added in index order.
const BLOCK: usize = 1024;

const EMBEDDED: &str = include_str!("../data/lattice_vector.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratingVector {
    pub z: Vec<u64>,
    pub n_max: u64,
    pub source: String,
}

impl GeneratingVector {
    /// 256-dimensional vector shipped with the crate, built by a randomised
    /// component-by-component search for product weights `γ_k = k⁻²`
    /// (see `tools/make_lattice_vector.py`), usable up to `N = 2^20`.
    pub fn embedded() -> Self {
        parse_generating_vector(EMBEDDED, DEFAULT_N_MAX, "embedded")
            .expect("embedded generating vector is well formed")
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }
}

/// Parses a generating vector from text: either `index component` pairs with
/// contiguous 1-based indices, or a single column of components. Blank lines
/// and lines starting with `#` are skipped.
pub fn parse_generating_vector(text: &str, n_max: u64, source: &str) -> Result<GeneratingVector> {
    let mut z = Vec::new();
    let mut paired: Option<bool> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse {
            line: lineno + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let this_paired = match fields.len() {
            1 => false,
            2 => true,
            n => return Err(err(format!("expected 1 or 2 fields, found {n}"))),
        };
        if *paired.get_or_insert(this_paired) != this_paired {
            return Err(err("mixed one- and two-column lines".into()));
        }
        let number = |s: &str| {
            s.parse::<u64>()
                .map_err(|e| err(format!("invalid integer {s:?}: {e}")))
        };
        if this_paired {
            let index = number(fields[0])?;
            if index != z.len() as u64 + 1 {
                return Err(err(format!("expected index {}, found {index}", z.len() + 1)));
            }
        }
        let comp = number(fields[fields.len() - 1])?;
        if comp == 0 {
            return Err(err("components must be positive".into()));
        }
        z.push(comp);
    }
    if z.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "no components found".into(),
        });
    }
    Ok(GeneratingVector {
        z,
        n_max,
        source: source.to_string(),
    })
}

pub fn load_generating_vector(path: &Path, n_max: Option<u64>) -> Result<GeneratingVector> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_generating_vector(&text, n_max.unwrap_or(DEFAULT_N_MAX), &path.display().to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EstimatorConfig {
    /// Points per shift (or per MC batch).
    pub n: usize,
    /// Number of random shifts (or MC batches).
    pub shifts: usize,
    pub seed: u64,
    pub dim: usize,
}

impl EstimatorConfig {
    pub fn new(n: usize, dim: usize, seed: u64) -> Self {
        Self {
            n,
            shifts: 16,
            seed,
            dim,
        }
    }

    pub fn validate(&self, n_max: u64) -> Result<()> {
        if self.n < 2 || !self.n.is_power_of_two() {
            return Err(Error::Config(format!("N = {} is not a power of two ≥ 2", self.n)));
        }
        if self.n as u64 > n_max {
            return Err(Error::Config(format!("N = {} exceeds n_max = {n_max}", self.n)));
        }
        if self.shifts < 2 {
            return Err(Error::Config("at least two shifts are needed for a standard error".into()));
        }
        if self.dim == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub per_shift_means: Vec<f64>,
    pub evals: u64,
}

impl Estimate {
    /// Mean and standard error (`R − 1` denominator) of the shift means.
    pub fn from_shift_means(per_shift_means: Vec<f64>, n: usize) -> Self {
        let r = per_shift_means.len() as f64;
        let value = per_shift_means.iter().sum::<f64>() / r;
        let ss: f64 = per_shift_means.iter().map(|m| (m - value).powi(2)).sum();
        let stderr = if per_shift_means.len() > 1 {
            (ss / (r - 1.0)).sqrt() / r.sqrt()
        } else {
            0.0
        };
        Self {
            value,
            stderr,
            evals: (per_shift_means.len() * n) as u64,
            per_shift_means,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            value: self.value * factor,
            stderr: self.stderr * factor.abs(),
            per_shift_means: self.per_shift_means.iter().map(|m| m * factor).collect(),
            evals: self.evals,
        }
    }
}

/// `frac(i·z/N + Δ)`, with `i·z_k mod N` formed exactly.
pub fn lattice_point(z: &[u64], n: u64, i: u64, shift: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; shift.len()];
    lattice_point_into(z, n, i, shift, &mut out)?;
    Ok(out)
}

fn lattice_point_into(z: &[u64], n: u64, i: u64, shift: &[f64], out: &mut [f64]) -> Result<()> {
    if shift.len() > z.len() {
        return Err(Error::DimensionOverflow {
            requested: shift.len(),
            available: z.len(),
        });
    }
    if n == 0 || i >= n {
        return Err(Error::Domain(format!("point index {i} outside 0..{n}")));
    }
    let scale = 1.0 / n as f64;
    for ((o, &zk), &dk) in out.iter_mut().zip(z).zip(shift) {
        let m = (i as u128 * zk as u128 % n as u128) as f64;
        let x = m * scale + dk;
        *o = if x >= 1.0 { x - 1.0 } else { x };
    }
    Ok(())
}

/// The `r`-th random shift: a uniform point of `[0,1)^dim` from the ChaCha
/// stream `r` of `seed`.
pub fn random_shift(seed: u64, r: u64, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r);
    (0..dim).map(|_| rng.random::<f64>()).collect()
}

fn to_gaussian(u: &[f64], y: &mut [f64]) {
    for (yk, &uk) in y.iter_mut().zip(u) {
        let p = if uk == 0.0 { ZERO_NUDGE } else { uk };
        *yk = inv_cdf(p).expect("lattice coordinates lie in (0, 1)");
    }
}

fn check(v: f64, shift: usize, index: usize) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::PoisonedEvaluation { shift, index })
    }
}

/// Sum of `term(i)` over `0..n` in fixed blocks, parallel across blocks and
/// reduced in index order.
fn ordered_sum<T>(n: usize, term: T) -> Result<f64>
where
    T: Fn(usize, &mut Vec<f64>, &mut Vec<f64>) -> Result<f64> + Sync,
{
    let blocks: Vec<f64> = (0..n.div_ceil(BLOCK))
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new()),
            |(u, y), b| {
                let mut s = 0.0;
                for i in b * BLOCK..((b + 1) * BLOCK).min(n) {
                    s += term(i, u, y)?;
                }
                Ok(s)
            },
        )
        .collect::<Result<_>>()?;
    Ok(blocks.iter().sum())
}

/// Randomly shifted lattice rule estimate of `E[g(Y)]`.
pub fn integrate_qmc<G>(g: G, cfg: &EstimatorConfig, z: &GeneratingVector) -> Result<Estimate>
where
    G: Fn(&[f64]) -> Result<f64> + Sync,
{
    cfg.validate(z.n_max)?;
    if cfg.dim > z.dim() {
        return Err(Error::DimensionOverflow {
            requested: cfg.dim,
            available: z.dim(),
        });
    }
    let n = cfg.n as u64;
    let means: Vec<f64> = (0..cfg.shifts)
        .into_par_iter()
        .map(|r| {
            let shift = random_shift(cfg.seed, r as u64, cfg.dim);
            let sum = ordered_sum(cfg.n, |i, u, y| {
                u.resize(cfg.dim, 0.0);
                y.resize(cfg.dim, 0.0);
                lattice_point_into(&z.z, n, i as u64, &shift, u)?;
                to_gaussian(u, y);
                check(g(y)?, r, i)
            })?;
            Ok(sum / cfg.n as f64)
        })
        .collect::<Result<_>>()?;
    Ok(Estimate::from_shift_means(means, cfg.n))
}

/// Monte Carlo estimate of `E[g(Y)]` from `R` independent batches of `N`
/// points.
pub fn integrate_mc<G>(g: G, cfg: &EstimatorConfig) -> Result<Estimate>
where
    G: Fn(&[f64]) -> Result<f64> + Sync,
{
    cfg.validate(u64::MAX)?;
    let means: Vec<f64> = (0..cfg.shifts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(MC_STREAM_OFFSET + r as u64);
            let mut y = vec![0.0; cfg.dim];
            let mut sum = 0.0;
            for i in 0..cfg.n {
                for yk in y.iter_mut() {
                    *yk = rng.sample(StandardNormal);
                }
                sum += check(g(&y)?, r, i)?;
            }
            Ok(sum / cfg.n as f64)
        })
        .collect::<Result<_>>()?;
    Ok(Estimate::from_shift_means(means, cfg.n))
}

/// Empirical rate `p` in `stderr ≈ C·N^{−p}` by least squares in log–log
/// coordinates.
pub fn convergence_rate(records: &[(usize, f64)]) -> Result<f64> {
    if records.len() < 3 {
        return Err(Error::Regression(format!(
            "{} records, at least 3 required",
            records.len()
        )));
    }
    let mut ns: Vec<usize> = records.iter().map(|r| r.0).collect();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() != records.len() {
        return Err(Error::Regression("repeated N".into()));
    }
    if records.iter().any(|r| r.0 == 0 || !(r.1 > 0.0 && r.1.is_finite())) {
        return Err(Error::Regression("N and stderr must be positive".into()));
    }
    let points: Vec<(f64, f64)> = records
        .iter()
        .map(|&(n, s)| ((n as f64).ln(), s.ln()))
        .collect();
    Ok(-fit_line(&points)?.0)
}
