//! Command line front end.
//!
//! Every file written with `--out` gets a `<out>.meta.json` sidecar, and every
//! JSON document carries a `meta` object. Both hold the resolved settings and
//! a canonical `args` vector: running `dl2u <args...> --out <file>` reproduces
//! the output byte for byte.

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::dgp::{simulate_path, RngSeed, SimulatedPath};
use crate::error::{Error, Result};
use crate::estimator::{ols_path, ols_rho, pivot, target_law};
use crate::ks::ks_test;
use crate::montecarlo::{
    histogram, pivot_samples, run_experiment, run_table, with_threads, ExperimentSpec, HistogramWindow, TableConfig,
    TableId, DEFAULT_ALPHA_LEVEL, DEFAULT_PATHS_PER_TEST, DEFAULT_REPLICATIONS, EXPLOSIVE_N, NEAR_STATIONARY_N,
};
use crate::oracles::{verify_suite, VerifyConfig, MIN_DRAWS};
use crate::sequences::{ModelParams, Regime, SequenceSpec};

pub const DEFAULT_SEED: u64 = 20_240_601;
pub const EXIT_VERIFY_FAILED: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "dl2u", version, about = "Moderate-deviation autoregressions with nearly nonstationary volatility")]
pub struct Cli {
    /// Worker threads (0 = all cores). Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one path and write `t,y,sigma2,u` as CSV.
    Simulate(SimulateArgs),
    /// Estimate rho and the regime pivot from a simulated path CSV.
    Estimate(EstimateArgs),
    /// Run R KS tests of B pivots each and summarize them.
    Experiment(ExperimentArgs),
    /// Reproduce one of the KS tables.
    Table(TableArgs),
    /// Histogram of pivots with the limiting density overlaid.
    Hist(HistArgs),
    /// Run the Monte Carlo oracle suite.
    Verify(VerifyArgs),
}

/// Model flags; unset values fall back to command-specific defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub d: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// const:v | log | pow:a | lin
    #[arg(long)]
    pub kn: Option<SequenceSpec>,
    /// const:v | log | pow:a | lin
    #[arg(long)]
    pub rn: Option<SequenceSpec>,
    /// stat | expl
    #[arg(long)]
    pub regime: Option<Regime>,
    #[arg(long)]
    pub y0: Option<f64>,
    #[arg(long)]
    pub z0: Option<f64>,
}

impl ModelArgs {
    pub fn resolve(&self, defaults: ModelParams) -> ModelParams {
        ModelParams {
            c: self.c.unwrap_or(defaults.c),
            d: self.d.unwrap_or(defaults.d),
            alpha: self.alpha.unwrap_or(defaults.alpha),
            n: self.n.unwrap_or(defaults.n),
            kn: self.kn.unwrap_or(defaults.kn),
            rn: self.rn.unwrap_or(defaults.rn),
            regime: self.regime.unwrap_or(defaults.regime),
            y0: self.y0.unwrap_or(defaults.y0),
            z0: self.z0.unwrap_or(defaults.z0),
        }
    }
}

fn model_args(p: &ModelParams) -> Vec<String> {
    [
        ("--n", p.n.to_string()),
        ("--c", p.c.to_string()),
        ("--d", p.d.to_string()),
        ("--alpha", p.alpha.to_string()),
        ("--kn", p.kn.to_string()),
        ("--rn", p.rn.to_string()),
        ("--regime", p.regime.to_string()),
        ("--y0", p.y0.to_string()),
        ("--z0", p.z0.to_string()),
    ]
    .into_iter()
    .flat_map(|(k, v)| [k.to_string(), v])
    .collect()
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, env = "DL2U_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Replication stream.
    #[arg(long, default_value_t = 0)]
    pub rep: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Path CSV as written by `simulate`; `n` is taken from it.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Pivots per KS test (B).
    #[arg(long, default_value_t = DEFAULT_PATHS_PER_TEST)]
    pub paths: usize,
    /// KS tests (R).
    #[arg(long, default_value_t = DEFAULT_REPLICATIONS)]
    pub reps: usize,
    #[arg(long, default_value_t = DEFAULT_ALPHA_LEVEL)]
    pub level: f64,
    #[arg(long, env = "DL2U_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    /// 1a | 1b | 2a | 2b
    #[arg(long)]
    pub id: TableId,
    #[arg(long, default_value_t = DEFAULT_REPLICATIONS)]
    pub reps: usize,
    #[arg(long, default_value_t = DEFAULT_PATHS_PER_TEST)]
    pub paths: usize,
    #[arg(long, env = "DL2U_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Overrides the table's own c.
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub d: f64,
    #[arg(long, default_value_t = SequenceSpec::LogOfN)]
    pub rn: SequenceSpec,
    #[arg(long = "n-stat", default_value_t = NEAR_STATIONARY_N)]
    pub n_stat: usize,
    #[arg(long = "n-expl", default_value_t = EXPLOSIVE_N)]
    pub n_expl: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Panel {
    /// Near-stationary T_n against N(0, 2c).
    Left,
    /// Mildly explosive S_n against the standard Cauchy.
    Right,
}

impl Panel {
    pub fn params(self) -> ModelParams {
        match self {
            Panel::Left => ModelParams {
                c: 1.0,
                d: 1.0,
                alpha: 0.5,
                n: NEAR_STATIONARY_N,
                kn: SequenceSpec::PowerOfN(0.25),
                regime: Regime::NearStationary,
                ..ModelParams::default()
            },
            Panel::Right => ModelParams {
                c: 0.5,
                d: 1.0,
                alpha: 0.5,
                n: EXPLOSIVE_N,
                kn: SequenceSpec::PowerOfN(0.5),
                regime: Regime::MildlyExplosive,
                ..ModelParams::default()
            },
        }
    }
}

impl fmt::Display for Panel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Panel::Left => "left",
            Panel::Right => "right",
        })
    }
}

#[derive(Debug, Args)]
pub struct HistArgs {
    #[arg(long, value_enum, default_value_t = Panel::Left)]
    pub panel: Panel,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = DEFAULT_PATHS_PER_TEST)]
    pub paths: usize,
    #[arg(long, default_value_t = 30)]
    pub bins: usize,
    /// full | quantile:lo,hi | fixed:lo,hi (default depends on the limit law)
    #[arg(long)]
    pub window: Option<HistogramWindow>,
    #[arg(long, env = "DL2U_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = MIN_DRAWS)]
    pub draws: usize,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.9)]
    pub phi: f64,
    #[arg(long = "convergence-paths", default_value_t = 200)]
    pub convergence_paths: usize,
    #[arg(long = "wnvn-paths", default_value_t = 2000)]
    pub wnvn_paths: usize,
    #[arg(long, env = "DL2U_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl FromStr for HistogramWindow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Usage(format!("unrecognized window '{s}', expected full, quantile:lo,hi or fixed:lo,hi"));
        if s == "full" {
            return Ok(HistogramWindow::Full);
        }
        let (kind, range) = s.split_once(':').ok_or_else(bad)?;
        let (lo, hi) = range.split_once(',').ok_or_else(bad)?;
        let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(bad());
        }
        match kind {
            "quantile" if (0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi) => {
                Ok(HistogramWindow::Quantile { lo, hi })
            }
            "fixed" => Ok(HistogramWindow::Fixed { lo, hi }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for HistogramWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HistogramWindow::Full => f.write_str("full"),
            HistogramWindow::Quantile { lo, hi } => write!(f, "quantile:{lo},{hi}"),
            HistogramWindow::Fixed { lo, hi } => write!(f, "fixed:{lo},{hi}"),
        }
    }
}

/// Resolved settings echoed next to every output.
#[derive(Debug, Serialize)]
pub struct Metadata<T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    /// Arguments that regenerate this output when followed by `--out <file>`.
    pub args: Vec<String>,
    pub resolved: T,
}

impl<T: Serialize> Metadata<T> {
    fn new(command: &'static str, args: Vec<String>, resolved: T) -> Self {
        let mut full = vec![command.to_string()];
        full.extend(args);
        Self { tool: "dl2u", version: env!("CARGO_PKG_VERSION"), command, args: full, resolved }
    }
}

/// Real numbers in CSV output: 17 significant digits.
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn open_output(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn write_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    let mut w = open_output(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_sidecar<T: Serialize>(out: Option<&Path>, meta: &Metadata<T>) -> Result<()> {
    match out {
        Some(path) => write_json(Some(&sidecar_path(path)), meta),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct SimulateResolved {
    params: ModelParams,
    seed: RngSeed,
}

fn cmd_simulate(args: &SimulateArgs) -> Result<i32> {
    let params = args.model.resolve(ModelParams::default());
    params.validate()?;
    let seed = RngSeed::new(args.seed, args.rep);
    let path = simulate_path(&params, seed)?;

    let mut canonical = model_args(&params);
    canonical.extend(["--seed".into(), args.seed.to_string(), "--rep".into(), args.rep.to_string()]);
    let meta = Metadata::new("simulate", canonical, SimulateResolved { params, seed });

    let mut w = csv::Writer::from_writer(open_output(args.out.as_deref())?);
    w.write_record(["t", "y", "sigma2", "u"])?;
    for t in 0..path.y.len() {
        let u = if t == 0 { String::new() } else { format_real(path.u[t - 1]) };
        w.write_record([t.to_string(), format_real(path.y[t]), format_real(path.sigma2[t]), u])?;
    }
    w.flush()?;
    write_sidecar(args.out.as_deref(), &meta)?;
    Ok(0)
}

/// Reads a `t,y,sigma2,u` CSV. The `u` entry of row 0 is empty.
pub fn read_path_csv(path: &Path) -> Result<SimulatedPath> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::InvalidInput(format!("{}: missing column '{name}'", path.display())))
    };
    let (iy, is, iu) = (column("y")?, column("sigma2")?, column("u")?);
    let parse = |field: Option<&str>, row: usize| -> Result<f64> {
        field
            .map(str::trim)
            .and_then(|f| f.parse::<f64>().ok())
            .ok_or_else(|| Error::InvalidInput(format!("{}: unparsable value in data row {row}", path.display())))
    };
    let (mut y, mut sigma2, mut u) = (Vec::new(), Vec::new(), Vec::new());
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        y.push(parse(record.get(iy), row)?);
        sigma2.push(parse(record.get(is), row)?);
        if row > 0 {
            u.push(parse(record.get(iu), row)?);
        }
    }
    if y.is_empty() {
        return Err(Error::InvalidInput(format!("{}: no data rows", path.display())));
    }
    Ok(SimulatedPath { y, sigma2, u })
}

#[derive(Serialize)]
struct EstimateOutput {
    meta: Metadata<ModelParams>,
    params: ModelParams,
    target: crate::ks::TargetLaw,
    rho_n: f64,
    rho_hat: f64,
    deviation: f64,
    pivot: crate::estimator::PivotValue,
}

fn cmd_estimate(args: &EstimateArgs) -> Result<i32> {
    let path = read_path_csv(&args.input)?;
    let n = path.len();
    if let Some(flag) = args.model.n {
        if flag != n {
            return Err(Error::Usage(format!("--n {flag} disagrees with the {n} transitions in the input")));
        }
    }
    let params = args.model.resolve(ModelParams { n, ..ModelParams::default() });
    params.validate()?;
    let rho = params.rho_n()?;
    let ols = if path.u.len() == n { ols_path(&path)? } else { ols_rho(&path.y)? };
    let pivot = pivot(&ols, &params)?;

    let mut canonical = vec!["--input".to_string(), args.input.display().to_string()];
    canonical.extend(model_args(&params));
    let output = EstimateOutput {
        meta: Metadata::new("estimate", canonical, params),
        params,
        target: pivot.target,
        rho_n: rho,
        rho_hat: ols.rho_hat,
        deviation: ols.deviation(rho),
        pivot,
    };
    write_json(args.out.as_deref(), &output)?;
    Ok(0)
}

#[derive(Serialize)]
struct ExperimentOutput {
    meta: Metadata<ExperimentSpec>,
    summary: crate::montecarlo::ExperimentSummary,
}

fn cmd_experiment(args: &ExperimentArgs) -> Result<i32> {
    let params = args.model.resolve(ModelParams::default());
    let spec = ExperimentSpec {
        params,
        paths_per_test: args.paths,
        replications: args.reps,
        alpha_level: args.level,
        seed: args.seed,
    };
    let summary = run_experiment(&spec)?;
    let mut canonical = model_args(&params);
    canonical.extend([
        "--paths".into(),
        args.paths.to_string(),
        "--reps".into(),
        args.reps.to_string(),
        "--level".into(),
        args.level.to_string(),
        "--seed".into(),
        args.seed.to_string(),
    ]);
    write_json(args.out.as_deref(), &ExperimentOutput { meta: Metadata::new("experiment", canonical, spec), summary })?;
    Ok(0)
}

#[derive(Serialize)]
struct TableResolved {
    id: TableId,
    config: TableConfig,
    rows: Vec<ExperimentSpec>,
}

fn cmd_table(args: &TableArgs) -> Result<i32> {
    if args.reps == 0 || args.paths == 0 {
        return Err(Error::Usage("--reps and --paths must be positive".to_string()));
    }
    let config = TableConfig {
        n_near_stationary: args.n_stat,
        n_explosive: args.n_expl,
        replications: args.reps,
        paths_per_test: args.paths,
        seed: args.seed,
        c: args.c,
        d: args.d,
        rn: args.rn,
    };
    let rows = run_table(args.id, &config)?;

    let mut canonical: Vec<String> = vec![
        "--id".into(),
        args.id.to_string(),
        "--reps".into(),
        args.reps.to_string(),
        "--paths".into(),
        args.paths.to_string(),
        "--seed".into(),
        args.seed.to_string(),
    ];
    if let Some(c) = args.c {
        canonical.extend(["--c".into(), c.to_string()]);
    }
    canonical.extend([
        "--d".into(),
        args.d.to_string(),
        "--rn".into(),
        args.rn.to_string(),
        "--n-stat".into(),
        args.n_stat.to_string(),
        "--n-expl".into(),
        args.n_expl.to_string(),
    ]);
    let resolved = TableResolved { id: args.id, config, rows: rows.iter().map(|r| r.spec).collect() };
    let meta = Metadata::new("table", canonical, resolved);

    let mut w = csv::Writer::from_writer(open_output(args.out.as_deref())?);
    w.write_record(["kn", "mean_ks", "acceptance"])?;
    for row in &rows {
        w.write_record([row.kn.clone(), format_real(row.mean_ks), format_real(row.acceptance)])?;
    }
    w.flush()?;
    write_sidecar(args.out.as_deref(), &meta)?;
    Ok(0)
}

#[derive(Serialize)]
struct HistResolved {
    panel: Panel,
    spec: ExperimentSpec,
    bins: usize,
    window: HistogramWindow,
}

#[derive(Serialize)]
struct HistOutput {
    meta: Metadata<HistResolved>,
    #[serde(flatten)]
    histogram: crate::montecarlo::Histogram,
    ks: crate::ks::KsResult,
}

fn cmd_hist(args: &HistArgs) -> Result<i32> {
    let params = args.model.resolve(args.panel.params());
    let spec = ExperimentSpec { paths_per_test: args.paths, replications: 1, ..ExperimentSpec::new(params, args.seed) };
    let law = target_law(&params)?;
    let window = args.window.unwrap_or_else(|| HistogramWindow::default_for(&law));
    let sample = pivot_samples(&spec, 0)?;
    let hist = histogram(&sample, law, args.bins, window)?;
    let ks = ks_test(&sample, &law)?;

    let mut canonical = vec!["--panel".to_string(), args.panel.to_string()];
    canonical.extend(model_args(&params));
    canonical.extend([
        "--paths".into(),
        args.paths.to_string(),
        "--bins".into(),
        args.bins.to_string(),
        "--window".into(),
        window.to_string(),
        "--seed".into(),
        args.seed.to_string(),
    ]);
    let meta = Metadata::new("hist", canonical, HistResolved { panel: args.panel, spec, bins: args.bins, window });
    write_json(args.out.as_deref(), &HistOutput { meta, histogram: hist, ks })?;
    Ok(0)
}

#[derive(Serialize)]
struct VerifyOutput {
    meta: Metadata<VerifyConfig>,
    report: crate::oracles::VerifyReport,
}

fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    if args.draws < MIN_DRAWS {
        return Err(Error::Usage(format!("--draws {} is below the minimum of {MIN_DRAWS}", args.draws)));
    }
    let config = VerifyConfig {
        alpha: args.alpha,
        phi: args.phi,
        draws: args.draws,
        seed: args.seed,
        convergence_paths: args.convergence_paths,
        wnvn_paths: args.wnvn_paths,
    };
    let report = verify_suite(&config)?;
    let passed = report.passed;
    let canonical = vec![
        "--draws".into(),
        args.draws.to_string(),
        "--alpha".into(),
        args.alpha.to_string(),
        "--phi".into(),
        args.phi.to_string(),
        "--convergence-paths".into(),
        args.convergence_paths.to_string(),
        "--wnvn-paths".into(),
        args.wnvn_paths.to_string(),
        "--seed".into(),
        args.seed.to_string(),
    ];
    write_json(args.out.as_deref(), &VerifyOutput { meta: Metadata::new("verify", canonical, config), report })?;
    Ok(if passed { 0 } else { EXIT_VERIFY_FAILED })
}

pub fn execute(command: &Command) -> Result<i32> {
    match command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Table(a) => cmd_table(a),
        Command::Hist(a) => cmd_hist(a),
        Command::Verify(a) => cmd_verify(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match with_threads(cli.threads, || execute(&cli.command)).and_then(|r| r) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("dl2u: {e}");
            e.exit_code()
        }
    }
}
