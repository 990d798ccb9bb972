//! Command-line front end for the preintegration experiments.
//!
//! Exit codes: 0 success, 2 invalid arguments or configuration, 3 numerical
//! failure, 4 I/O error.

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use preint::analytic::AnalyticExample;
use preint::asian::{FactorizationKind, MarketParams, Method};
use preint::experiments::{
    cmd_converge, cmd_example, cmd_singularity, run_converge, save_example_csv, save_singularity_csv,
    singularity_report, write_convergence_csv, write_example_csv, write_singularity_csv, ConvergeConfig,
    SingularityTarget,
};
use preint::integrand::Flavor;
use preint::qmc::{load_generating_vector, GeneratingVector};
use preint::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "preint", version, about = "Preintegration, singularity probes and QMC option pricing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the preintegrated function of an analytic example.
    Example(ExampleArgs),
    /// Locate critical points and fit the local singularity exponent.
    Singularity(SingularityArgs),
    /// Convergence of the digital Asian option price in N.
    Converge(ConvergeArgs),
    /// Price the digital Asian option once per method.
    Price(PriceArgs),
}

#[derive(Args)]
struct Market {
    /// Number of monitoring dates.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, default_value_t = 100.0)]
    s0: f64,
    #[arg(long, default_value_t = 110.0)]
    strike: f64,
    #[arg(long, default_value_t = 1.0)]
    maturity: f64,
    #[arg(long, default_value_t = 0.1)]
    rate: f64,
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
}

impl Market {
    fn params(&self, default_d: usize) -> MarketParams {
        MarketParams {
            s0: self.s0,
            strike: self.strike,
            maturity: self.maturity,
            rate: self.rate,
            sigma: self.sigma,
            d: self.d.unwrap_or(default_d),
        }
    }
}

#[derive(Args)]
struct ExampleArgs {
    /// parabola, hyperbola, cross, cubic (or 1-4).
    #[arg(long, default_value = "parabola")]
    example: String,
    /// Preintegration axis, 1 or 2.
    #[arg(long, default_value_t = 1)]
    axis: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    t: f64,
    /// jump or kink.
    #[arg(long, default_value = "jump")]
    flavor: String,
    #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
    from: f64,
    #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
    to: f64,
    #[arg(long, default_value_t = 121)]
    samples: usize,
    /// CSV output path (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SingularityArgs {
    /// An analytic example name, or `option` for the average-price model.
    #[arg(long, default_value = "parabola")]
    target: String,
    /// Preintegration axis (default 1, or 2 for `option`).
    #[arg(long)]
    axis: Option<usize>,
    /// Comma-separated levels t.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    t_grid: String,
    #[arg(long, default_value = "jump")]
    flavor: String,
    #[command(flatten)]
    market: Market,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Cubature {
    /// Number of random shifts (or MC batches).
    #[arg(long, default_value_t = 16)]
    shifts: usize,
    #[arg(long, default_value_t = 20220427)]
    seed: u64,
    /// Generating vector file, or `embedded`.
    #[arg(long, default_value = "embedded")]
    vector: String,
    #[arg(long, default_value = "pca")]
    factorization: String,
    /// Comma-separated list of mc, qmc, preint1, preint2.
    #[arg(long, default_value = "mc,qmc,preint1,preint2")]
    methods: String,
}

#[derive(Args)]
struct ConvergeArgs {
    #[command(flatten)]
    market: Market,
    #[command(flatten)]
    cubature: Cubature,
    /// Comma-separated point counts, e.g. `1024,2048` or `2^10,2^11`.
    #[arg(long)]
    n_list: Option<String>,
    /// 256 dates and N up to 2^19 unless overridden. Slow.
    #[arg(long)]
    paper_scale: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PriceArgs {
    #[command(flatten)]
    market: Market,
    #[command(flatten)]
    cubature: Cubature,
    /// Points per shift.
    #[arg(long, default_value = "2^14")]
    n: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_count(s: &str) -> Result<usize, Error> {
    let s = s.trim();
    let bad = || Error::Config(format!("invalid point count {s:?}"));
    match s.strip_prefix("2^") {
        Some(e) => {
            let e: u32 = e.parse().map_err(|_| bad())?;
            1usize.checked_shl(e).filter(|_| e < 63).ok_or_else(bad)
        }
        None => s.parse().map_err(|_| bad()),
    }
}

fn parse_list<T>(s: &str, f: impl Fn(&str) -> Result<T, Error>) -> Result<Vec<T>, Error> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(|p| f(p.trim())).collect()
}

fn parse_float(s: &str) -> Result<f64, Error> {
    s.parse().map_err(|_| Error::Config(format!("invalid number {s:?}")))
}

fn one_based(axis: usize) -> Result<usize, Error> {
    axis.checked_sub(1)
        .ok_or_else(|| Error::Config("axes are numbered from 1".into()))
}

fn vector(spec: &str) -> Result<GeneratingVector, Error> {
    if spec == "embedded" {
        Ok(GeneratingVector::embedded())
    } else {
        load_generating_vector(Path::new(spec), None)
    }
}

fn io_error(path: Option<&Path>, source: io::Error) -> Error {
    Error::Io {
        path: path.map_or_else(|| PathBuf::from("<stdout>"), Path::to_path_buf),
        source,
    }
}

fn run_example(a: ExampleArgs) -> Result<(), Error> {
    let id: AnalyticExample = a.example.parse()?;
    let flavor = parse_flavor(&a.flavor)?;
    let rows = cmd_example(id, one_based(a.axis)?, flavor, a.t, (a.from, a.to), a.samples)?;
    match &a.out {
        Some(p) => save_example_csv(p, &rows),
        None => write_example_csv(io::stdout().lock(), &rows).map_err(|e| io_error(None, e)),
    }
}

fn parse_flavor(s: &str) -> Result<Flavor, Error> {
    match s {
        "jump" => Ok(Flavor::Jump),
        "kink" => Ok(Flavor::Kink),
        _ => Err(Error::Config(format!("unknown flavor {s:?} (expected jump or kink)"))),
    }
}

fn run_singularity(a: SingularityArgs) -> Result<(), Error> {
    let target = if a.target == "option" {
        SingularityTarget::Option {
            params: a.market.params(2),
            axis: one_based(a.axis.unwrap_or(2))?,
        }
    } else {
        SingularityTarget::Analytic {
            id: a.target.parse()?,
            axis: one_based(a.axis.unwrap_or(1))?,
            flavor: parse_flavor(&a.flavor)?,
            t_grid: parse_list(&a.t_grid, parse_float)?,
        }
    };
    let rows = cmd_singularity(&target)?;
    match &a.out {
        Some(p) => {
            save_singularity_csv(p, &rows)?;
            print!("{}", singularity_report(&rows));
            Ok(())
        }
        None => write_singularity_csv(io::stdout().lock(), &rows).map_err(|e| io_error(None, e)),
    }
}

fn market_setup(market: &Market, c: &Cubature, default_d: usize) -> Result<(MarketParams, FactorizationKind, Vec<Method>), Error> {
    let params = market.params(default_d);
    let factorization = c.factorization.parse()?;
    let methods = parse_list(&c.methods, |s| s.parse::<Method>())?;
    Ok((params, factorization, methods))
}

fn run_converge_cmd(a: ConvergeArgs) -> Result<(), Error> {
    let base = if a.paper_scale {
        ConvergeConfig::paper_scale()
    } else {
        ConvergeConfig::desk()
    };
    let (params, factorization, methods) = market_setup(&a.market, &a.cubature, base.params.d)?;
    let n_list = match &a.n_list {
        Some(s) => parse_list(s, parse_count)?,
        None => base.n_list,
    };
    let cfg = ConvergeConfig {
        params,
        factorization,
        methods,
        n_list,
        shifts: a.cubature.shifts,
        seed: a.cubature.seed,
    };
    let z = vector(&a.cubature.vector)?;
    let run = cmd_converge(&cfg, &z, &a.out)?;
    for (m, rate) in &run.rates {
        println!("{m}: rate {rate:.3}");
    }
    Ok(())
}

fn run_price(a: PriceArgs) -> Result<(), Error> {
    let (params, factorization, methods) = market_setup(&a.market, &a.cubature, 16)?;
    let cfg = ConvergeConfig {
        params,
        factorization,
        methods,
        n_list: vec![parse_count(&a.n)?],
        shifts: a.cubature.shifts,
        seed: a.cubature.seed,
    };
    let z = vector(&a.cubature.vector)?;
    let run = run_converge(&cfg, &z)?;
    let mut stdout = io::stdout().lock();
    for r in &run.records {
        writeln!(stdout, "{:<10} {:.10} ± {:.3e}  ({} evaluations)", r.method, r.estimate, r.stderr, r.evals)
            .map_err(|e| io_error(None, e))?;
    }
    if let Some(p) = &a.out {
        let file = std::fs::File::create(p).map_err(|e| io_error(Some(p), e))?;
        write_convergence_csv(io::BufWriter::new(file), &run).map_err(|e| io_error(Some(p), e))?;
    }
    match run.failure {
        Some((_, _, e)) => Err(e),
        None => Ok(()),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => EXIT_IO,
        e if e.is_config() => EXIT_CONFIG,
        _ => EXIT_NUMERIC,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Example(a) => run_example(a),
        Command::Singularity(a) => run_singularity(a),
        Command::Converge(a) => run_converge_cmd(a),
        Command::Price(a) => run_price(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
