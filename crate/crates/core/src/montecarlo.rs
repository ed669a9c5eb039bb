//! Replication harness: batches of simulated pivots, a KS test per batch,
//! and summaries over replications.
//!
//! Path `j` of replication `rep` always uses seed `(base, rep * B + j)`, so a
//! summary is a pure function of the spec regardless of scheduling.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dgp::{simulate_path_with, Coefficients, RngSeed};
use crate::error::{Error, Result};
use crate::estimator::{ols_path, pivot, target_law};
use crate::ks::{ks_test, KsResult, TargetLaw};
use crate::sequences::{ModelParams, Regime, SequenceSpec};

pub const DEFAULT_PATHS_PER_TEST: usize = 500;
pub const DEFAULT_REPLICATIONS: usize = 100;
pub const DEFAULT_ALPHA_LEVEL: f64 = 0.05;
pub const NEAR_STATIONARY_N: usize = 1000;
pub const EXPLOSIVE_N: usize = 300;
/// `k_n` used for the "constant" table rows.
pub const CONSTANT_KN: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub params: ModelParams,
    /// Pivots per KS test (`B`).
    pub paths_per_test: usize,
    /// Number of KS tests (`R`).
    pub replications: usize,
    pub alpha_level: f64,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn new(params: ModelParams, seed: u64) -> Self {
        Self {
            params,
            paths_per_test: DEFAULT_PATHS_PER_TEST,
            replications: DEFAULT_REPLICATIONS,
            alpha_level: DEFAULT_ALPHA_LEVEL,
            seed,
        }
    }

    pub fn path_seed(&self, rep: usize, j: usize) -> RngSeed {
        RngSeed::new(self.seed, (rep * self.paths_per_test + j) as u64)
    }

    fn validate(&self) -> Result<()> {
        if self.paths_per_test == 0 {
            return Err(Error::Usage("paths per test must be positive".to_string()));
        }
        if self.replications == 0 {
            return Err(Error::Usage("replications must be positive".to_string()));
        }
        if !(self.alpha_level > 0.0 && self.alpha_level < 1.0) {
            return Err(Error::Usage(format!("alpha level must lie in (0, 1), got {}", self.alpha_level)));
        }
        self.params.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub mean_ks: f64,
    pub acceptance_proportion: f64,
    pub per_replication: Vec<KsResult>,
}

impl ExperimentSummary {
    pub fn from_results(per_replication: Vec<KsResult>, alpha_level: f64) -> Self {
        let r = per_replication.len() as f64;
        let mean_ks = per_replication.iter().map(|k| k.d_stat).sum::<f64>() / r;
        let accepted = per_replication.iter().filter(|k| k.p_value > alpha_level).count();
        Self { mean_ks, acceptance_proportion: accepted as f64 / r, per_replication }
    }
}

/// The `B` pivot values of one replication, in path order.
pub fn pivot_samples(spec: &ExperimentSpec, rep: usize) -> Result<Vec<f64>> {
    spec.validate()?;
    if rep >= spec.replications {
        return Err(Error::Usage(format!("replication {rep} is outside 0..{}", spec.replications)));
    }
    let params = spec.params;
    let coef = Coefficients::from_params(&params)?;
    (0..spec.paths_per_test)
        .into_par_iter()
        .map(|j| {
            let seed = spec.path_seed(rep, j);
            let value = simulate_path_with(&coef, params.n, seed)
                .and_then(|path| ols_path(&path))
                .and_then(|ols| pivot(&ols, &params))
                .map(|p| p.value);
            value.map_err(|e| Error::Replication { rep, base: seed.base, stream: seed.stream, source: Box::new(e) })
        })
        .collect()
}

pub fn run_replication(spec: &ExperimentSpec, rep: usize) -> Result<KsResult> {
    let sample = pivot_samples(spec, rep)?;
    ks_test(&sample, &target_law(&spec.params)?)
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentSummary> {
    spec.validate()?;
    let results =
        (0..spec.replications).into_par_iter().map(|rep| run_replication(spec, rep)).collect::<Result<Vec<_>>>()?;
    Ok(ExperimentSummary::from_results(results, spec.alpha_level))
}

/// Runs `f` on a dedicated pool of `threads` workers (`0` = rayon default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Usage(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TableId {
    /// Homoskedastic, near-stationary.
    T1a,
    /// Homoskedastic, mildly explosive.
    T1b,
    /// Stochastic volatility, mildly explosive.
    T2a,
    /// Stochastic volatility, near-stationary.
    T2b,
}

impl FromStr for TableId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "1a" | "t1a" => Ok(TableId::T1a),
            "1b" | "t1b" => Ok(TableId::T1b),
            "2a" | "t2a" => Ok(TableId::T2a),
            "2b" | "t2b" => Ok(TableId::T2b),
            _ => Err(Error::Usage(format!("unknown table id '{s}' (expected 1a, 1b, 2a or 2b)"))),
        }
    }
}

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TableId::T1a => "1a",
            TableId::T1b => "1b",
            TableId::T2a => "2a",
            TableId::T2b => "2b",
        })
    }
}

impl TableId {
    pub fn regime(&self) -> Regime {
        match self {
            TableId::T1a | TableId::T2b => Regime::NearStationary,
            TableId::T1b | TableId::T2a => Regime::MildlyExplosive,
        }
    }

    pub fn homoskedastic(&self) -> bool {
        matches!(self, TableId::T1a | TableId::T1b)
    }

    /// `k_n` rows in table order.
    pub fn rows(&self) -> Vec<SequenceSpec> {
        let powers = [0.1, 0.25, 0.5, 0.75, 0.99].map(SequenceSpec::PowerOfN);
        let mut rows = Vec::new();
        if self.homoskedastic() {
            rows.push(SequenceSpec::Constant(CONSTANT_KN));
            rows.push(SequenceSpec::LogOfN);
        }
        rows.extend(powers);
        rows.push(SequenceSpec::LinearN);
        rows
    }

    /// Published (mean KS, acceptance proportion) per row, for comparison.
    pub fn reported(&self) -> &'static [(f64, f64)] {
        match self {
            TableId::T1a => &[
                (0.0515, 0.95),
                (0.0528, 0.90),
                (0.0498, 0.95),
                (0.0503, 0.94),
                (0.1046, 0.80),
                (0.1321, 0.82),
                (0.2175, 0.66),
                (0.3031, 0.00),
            ],
            TableId::T1b => &[
                (0.0439, 0.90),
                (0.0519, 0.96),
                (0.0585, 0.92),
                (0.0504, 0.95),
                (0.0671, 0.88),
                (0.1068, 0.79),
                (0.2741, 0.61),
                (0.3081, 0.04),
            ],
            TableId::T2a => {
                &[(0.1037, 0.95), (0.0952, 0.92), (0.0901, 0.93), (0.1012, 0.85), (0.1447, 0.71), (0.2948, 0.01)]
            }
            TableId::T2b => {
                &[(0.0495, 0.95), (0.0526, 0.94), (0.0634, 0.84), (0.1163, 0.71), (0.1982, 0.57), (0.3768, 0.00)]
            }
        }
    }
}

/// Settings shared by every row of a table run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableConfig {
    pub n_near_stationary: usize,
    pub n_explosive: usize,
    pub replications: usize,
    pub paths_per_test: usize,
    pub seed: u64,
    /// Overrides the table's default `c`.
    pub c: Option<f64>,
    pub d: f64,
    pub rn: SequenceSpec,
}

impl TableConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            n_near_stationary: NEAR_STATIONARY_N,
            n_explosive: EXPLOSIVE_N,
            replications: DEFAULT_REPLICATIONS,
            paths_per_test: DEFAULT_PATHS_PER_TEST,
            seed,
            c: None,
            d: 1.0,
            rn: SequenceSpec::LogOfN,
        }
    }

    /// Model parameters of one row.
    pub fn row_params(&self, table: TableId, kn: SequenceSpec) -> ModelParams {
        let regime = table.regime();
        let default_c = match table {
            TableId::T1b => 0.5,
            _ => 1.0,
        };
        ModelParams {
            c: self.c.unwrap_or(default_c),
            d: self.d,
            alpha: if table.homoskedastic() { 0.0 } else { 0.5 },
            n: match regime {
                Regime::NearStationary => self.n_near_stationary,
                Regime::MildlyExplosive => self.n_explosive,
            },
            kn,
            rn: self.rn,
            regime,
            y0: 0.0,
            z0: 0.0,
        }
    }

    pub fn row_spec(&self, table: TableId, row: usize, kn: SequenceSpec) -> ExperimentSpec {
        ExperimentSpec {
            params: self.row_params(table, kn),
            paths_per_test: self.paths_per_test,
            replications: self.replications,
            alpha_level: DEFAULT_ALPHA_LEVEL,
            // Rows draw from disjoint seed bases.
            seed: self.seed.wrapping_add((row as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub kn: String,
    pub mean_ks: f64,
    pub acceptance: f64,
    pub spec: ExperimentSpec,
    pub summary: ExperimentSummary,
}

pub fn run_table(table: TableId, config: &TableConfig) -> Result<Vec<TableRow>> {
    table
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, kn)| {
            let spec = config.row_spec(table, i, kn);
            let summary = run_experiment(&spec)?;
            Ok(TableRow {
                kn: kn.label(),
                mean_ks: summary.mean_ks,
                acceptance: summary.acceptance_proportion,
                spec,
                summary,
            })
        })
        .collect()
}

/// How the histogram range is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HistogramWindow {
    /// Sample minimum to sample maximum.
    Full,
    Fixed {
        lo: f64,
        hi: f64,
    },
    /// Empirical quantiles of the sample.
    Quantile {
        lo: f64,
        hi: f64,
    },
}

impl HistogramWindow {
    /// Full range for the normal limit, central 98% for the Cauchy limit.
    pub fn default_for(law: &TargetLaw) -> Self {
        match law {
            TargetLaw::Normal { .. } => HistogramWindow::Full,
            TargetLaw::StandardCauchy => HistogramWindow::Quantile { lo: 0.01, hi: 0.99 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub overlay_x: Vec<f64>,
    pub overlay_density: Vec<f64>,
    pub target: TargetLaw,
    pub sample_size: usize,
    /// Observations outside the window.
    pub clipped: usize,
}

impl Histogram {
    /// Counts scaled to a density over the full sample.
    pub fn empirical_density(&self) -> Vec<f64> {
        self.counts
            .iter()
            .zip(self.edges.windows(2))
            .map(|(&c, e)| c as f64 / (self.sample_size as f64 * (e[1] - e[0])))
            .collect()
    }
}

fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Equal-width histogram of `sample` with the target density at bin midpoints.
pub fn histogram(sample: &[f64], law: TargetLaw, bins: usize, window: HistogramWindow) -> Result<Histogram> {
    if bins < 10 {
        return Err(Error::Usage(format!("histograms need at least 10 bins, got {bins}")));
    }
    if sample.is_empty() || sample.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("histogram sample must be nonempty and finite".to_string()));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = match window {
        HistogramWindow::Full => (sorted[0], sorted[sorted.len() - 1]),
        HistogramWindow::Fixed { lo, hi } => (lo, hi),
        HistogramWindow::Quantile { lo, hi } => (empirical_quantile(&sorted, lo), empirical_quantile(&sorted, hi)),
    };
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| if i == bins { hi } else { lo + i as f64 * width }).collect();

    let mut counts = vec![0u64; bins];
    let mut clipped = 0;
    for &x in &sorted {
        if x < lo || x > hi {
            clipped += 1;
            continue;
        }
        let idx = (((x - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let overlay_x: Vec<f64> = edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect();
    let overlay_density = overlay_x.iter().map(|&x| law.pdf(x)).collect();
    Ok(Histogram { edges, counts, overlay_x, overlay_density, target: law, sample_size: sample.len(), clipped })
}

/// Histogram of the pivots of replication 0.
pub fn emit_histogram(spec: &ExperimentSpec, bins: usize, window: Option<HistogramWindow>) -> Result<Histogram> {
    let law = target_law(&spec.params)?;
    let sample = pivot_samples(spec, 0)?;
    histogram(&sample, law, bins, window.unwrap_or_else(|| HistogramWindow::default_for(&law)))
}
