//! Monte Carlo checks of the closed-form volatility moments and of the
//! large-sample limits the pivots rely on.
//!
//! Log-normal expectations are estimated from antithetic pairs of simulated
//! log-variance paths (`eta` and `-eta`), started at `z_0 = 0`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dgp::{simulate_path, simulate_path_with, Coefficients, GaussianStream, RngSeed, Series};
use crate::error::{Error, Result};
use crate::estimator::normalized_sum_squares;
use crate::sequences::{ModelParams, Regime, SequenceSpec, VolatilityScales};

pub const MIN_DRAWS: usize = 100_000;
pub const Z_THRESHOLD: f64 = 4.0;

const PAIRS_PER_CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub label: String,
    pub mc_estimate: f64,
    pub closed_form: f64,
    pub mc_std_error: f64,
    pub z_score: f64,
    pub passed: bool,
}

impl MomentCheck {
    fn new(label: String, mc_estimate: f64, closed_form: f64, mc_std_error: f64) -> Self {
        let z_score = if mc_estimate == closed_form { 0.0 } else { (mc_estimate - closed_form) / mc_std_error };
        Self { label, mc_estimate, closed_form, mc_std_error, z_score, passed: z_score.abs() <= Z_THRESHOLD }
    }
}

/// `A_t` for an arbitrary `phi`, independent of any rate sequence.
fn dispersion(phi: f64, t: usize) -> f64 {
    VolatilityScales::new(phi, 0.0, 1, 2.0, 1.0).a(t)
}

fn check_inputs(alpha: f64, phi: f64, draws: usize) -> Result<()> {
    if draws < MIN_DRAWS {
        return Err(Error::Usage(format!("moment checks need at least {MIN_DRAWS} draws, got {draws}")));
    }
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::Domain(format!("alpha must be finite and nonnegative, got {alpha}")));
    }
    if !(phi > 0.0 && phi < 1.0) {
        return Err(Error::Domain(format!("phi must lie in (0, 1), got {phi}")));
    }
    Ok(())
}

/// Mean and standard error of `f` over antithetic pairs of log-variance paths
/// `z_1..=z_len`; `f` receives the path and returns the functional.
fn antithetic_mean(
    alpha: f64,
    phi: f64,
    len: usize,
    draws: usize,
    seed: u64,
    f: impl Fn(&[f64]) -> f64 + Sync,
) -> (f64, f64) {
    let pairs = (draws / 2).max(1);
    // Accumulating deviations from the zero-path value keeps degenerate
    // (alpha = 0) estimates exact.
    let reference = f(&vec![0.0; len]);
    let chunks = pairs.div_ceil(PAIRS_PER_CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let count = PAIRS_PER_CHUNK.min(pairs - chunk * PAIRS_PER_CHUNK);
            let mut eta = GaussianStream::new(RngSeed::new(seed, chunk as u64), Series::Oracle);
            let mut plus = vec![0.0; len];
            let mut minus = vec![0.0; len];
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for _ in 0..count {
                let mut z = 0.0;
                for t in 0..len {
                    z = phi * z + alpha * eta.draw();
                    plus[t] = z;
                    minus[t] = -z;
                }
                let v = 0.5 * (f(&plus) + f(&minus)) - reference;
                sum += v;
                sum_sq += v * v;
            }
            (sum, sum_sq)
        })
        .collect();
    let (sum, sum_sq) = partial.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let m = pairs as f64;
    let mean = sum / m;
    let var = ((sum_sq - m * mean * mean) / (m - 1.0).max(1.0)).max(0.0);
    (reference + mean, (var / m).sqrt())
}

/// `E[sigma_t^2] = exp(alpha^2 A_t)`.
pub fn check_mean_sigma2(alpha: f64, phi: f64, t: usize, draws: usize, seed: u64) -> Result<MomentCheck> {
    check_inputs(alpha, phi, draws)?;
    let closed = (alpha * alpha * dispersion(phi, t)).exp();
    let (mc, se) = antithetic_mean(alpha, phi, t, draws, seed, |z| z[t - 1].exp());
    Ok(MomentCheck::new(format!("mean_sigma2(alpha={alpha}, phi={phi}, t={t})"), mc, closed, se))
}

/// `E[sigma_t^4] = exp(2 Var z_t) = exp(4 alpha^2 A_t)`.
pub fn check_fourth_moment(alpha: f64, phi: f64, t: usize, draws: usize, seed: u64) -> Result<MomentCheck> {
    check_inputs(alpha, phi, draws)?;
    let closed = (4.0 * alpha * alpha * dispersion(phi, t)).exp();
    let (mc, se) = antithetic_mean(alpha, phi, t, draws, seed, |z| (2.0 * z[t - 1]).exp());
    Ok(MomentCheck::new(format!("fourth_moment(alpha={alpha}, phi={phi}, t={t})"), mc, closed, se))
}

/// Log of `E[sigma_s^2 sigma_t^2]` for `s <= t`.
pub fn cross_moment_log(alpha: f64, phi: f64, s: usize, t: usize) -> f64 {
    let a2 = alpha * alpha;
    let a_s = dispersion(phi, s);
    a2 * a_s + a2 * dispersion(phi, t) + 2.0 * a2 * phi.powi((t - s) as i32) * a_s
}

/// `E[sigma_s^2 sigma_t^2] = exp(alpha^2 A_s + alpha^2 A_t + 2 alpha^2 phi^{t-s} A_s)`.
pub fn check_cross_moment(alpha: f64, phi: f64, s: usize, t: usize, draws: usize, seed: u64) -> Result<MomentCheck> {
    check_inputs(alpha, phi, draws)?;
    if s == 0 || s > t {
        return Err(Error::Usage(format!("cross moment needs 1 <= s <= t, got s = {s}, t = {t}")));
    }
    let closed = cross_moment_log(alpha, phi, s, t).exp();
    let (mc, se) = antithetic_mean(alpha, phi, t, draws, seed, |z| (z[s - 1] + z[t - 1]).exp());
    Ok(MomentCheck::new(format!("cross_moment(alpha={alpha}, phi={phi}, s={s}, t={t})"), mc, closed, se))
}

/// Grid of lagged log-variances used by [`check_conditional_mean`].
pub const CONDITIONAL_GRID: [f64; 3] = [-1.0, 0.0, 1.0];

/// `E[sigma_t^2 | z_{t-1}] = exp(phi z_{t-1} + alpha^2 / 2)`, one check per grid point.
pub fn check_conditional_mean(alpha: f64, phi: f64, draws: usize, seed: u64) -> Result<Vec<MomentCheck>> {
    check_inputs(alpha, phi, draws)?;
    CONDITIONAL_GRID
        .iter()
        .enumerate()
        .map(|(i, &z_prev)| {
            let closed = (phi * z_prev + 0.5 * alpha * alpha).exp();
            // A one-step path from z_0 = 0 gives z_1 = eta_1; shift it by phi z_prev.
            let (mc, se) =
                antithetic_mean(alpha, phi, 1, draws, seed.wrapping_add(i as u64), |z| (phi * z_prev + z[0]).exp());
            Ok(MomentCheck::new(format!("conditional_mean(alpha={alpha}, phi={phi}, z_prev={z_prev})"), mc, closed, se))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub n: usize,
    pub mean: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub label: String,
    pub target: f64,
    pub points: Vec<ConvergencePoint>,
    pub passed: bool,
}

/// Mean of `sum y_t^2 / (n k_n m_n)` over `paths` paths at each grid point,
/// against `1 / (2c)`. Passes when the error at the last grid point is below
/// the first and within 15% of the target.
pub fn check_sum_squares_convergence(grid: &[ModelParams], paths: usize, seed: u64) -> Result<ConvergenceReport> {
    if grid.is_empty() || paths == 0 {
        return Err(Error::Usage("convergence check needs a nonempty grid and at least one path".to_string()));
    }
    let c = grid[0].c;
    if grid.iter().any(|p| p.c != c || p.regime != Regime::NearStationary) {
        return Err(Error::Usage("convergence grid must share c and be near-stationary".to_string()));
    }
    let target = 1.0 / (2.0 * c);
    let mut points = Vec::with_capacity(grid.len());
    for params in grid {
        let scales = params.scales()?;
        let values = (0..paths)
            .into_par_iter()
            .map(|j| {
                let path = simulate_path(params, RngSeed::new(seed, j as u64))?;
                normalized_sum_squares(&path, params, &scales)
            })
            .collect::<Result<Vec<_>>>()?;
        let mean = values.iter().sum::<f64>() / paths as f64;
        points.push(ConvergencePoint { n: params.n, mean, abs_error: (mean - target).abs() });
    }
    let first = points[0].abs_error;
    let last = points[points.len() - 1].abs_error;
    let passed = last < first && last <= 0.15 * target;
    let p0 = &grid[0];
    let label = format!("sum_squares_convergence(c={}, alpha={}, d={}, k_n={})", p0.c, p0.alpha, p0.d, p0.kn);
    Ok(ConvergenceReport { label, target, points, passed })
}

/// Grid `n in {10^3, 10^4, 10^5}` with `k_n = n^0.25`.
pub fn sum_squares_grid(c: f64, d: f64, alpha: f64) -> Vec<ModelParams> {
    [1_000, 10_000, 100_000]
        .into_iter()
        .map(|n| ModelParams { c, d, alpha, n, kn: SequenceSpec::PowerOfN(0.25), ..ModelParams::default() })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WnVnReport {
    pub paths: usize,
    pub target_variance: f64,
    pub var_w: f64,
    pub var_v: f64,
    pub se_var_w: f64,
    pub se_var_v: f64,
    pub correlation: f64,
    pub se_correlation: f64,
    pub z_var_w: f64,
    pub z_var_v: f64,
    pub z_correlation: f64,
    pub passed: bool,
}

/// `W_n = sum rho^{-j} u_j / sqrt(l_n k_n)` and
/// `V_n = sum rho^{-(n-j+1)} u_j / sqrt(l_n k_n)` for one path.
pub fn wn_vn(u: &[f64], ln_rho: f64, log_l_n: f64, k_n: f64) -> (f64, f64) {
    let n = u.len();
    let log_norm = 0.5 * (log_l_n + k_n.ln());
    let (mut w, mut v) = (0.0, 0.0);
    for (i, &x) in u.iter().enumerate() {
        let j = (i + 1) as f64;
        w += x * (-j * ln_rho - log_norm).exp();
        v += x * (-((n - i) as f64) * ln_rho - log_norm).exp();
    }
    (w, v)
}

/// Sample variances of `W_n`, `V_n` against `1 / (2c)` and their correlation
/// against zero, each within four standard errors.
pub fn check_wnvn(params: &ModelParams, paths: usize, seed: u64) -> Result<WnVnReport> {
    if params.regime != Regime::MildlyExplosive {
        return Err(Error::Usage("the (W_n, V_n) check applies to the mildly explosive regime".to_string()));
    }
    if paths < 10 {
        return Err(Error::Usage(format!("the (W_n, V_n) check needs at least 10 paths, got {paths}")));
    }
    let coef = Coefficients::from_params(params)?;
    let scales = params.scales()?;
    let ln_rho = params.ln_rho_n()?;
    let k = params.k_n()?;
    let pairs = (0..paths)
        .into_par_iter()
        .map(|j| {
            let path = simulate_path_with(&coef, params.n, RngSeed::new(seed, j as u64))?;
            Ok(wn_vn(&path.u, ln_rho, scales.log_l_n, k))
        })
        .collect::<Result<Vec<_>>>()?;

    let b = paths as f64;
    let mean_w = pairs.iter().map(|p| p.0).sum::<f64>() / b;
    let mean_v = pairs.iter().map(|p| p.1).sum::<f64>() / b;
    let var_w = pairs.iter().map(|p| (p.0 - mean_w).powi(2)).sum::<f64>() / (b - 1.0);
    let var_v = pairs.iter().map(|p| (p.1 - mean_v).powi(2)).sum::<f64>() / (b - 1.0);
    let cov = pairs.iter().map(|p| (p.0 - mean_w) * (p.1 - mean_v)).sum::<f64>() / (b - 1.0);
    let correlation = cov / (var_w * var_v).sqrt();

    let target_variance = 1.0 / (2.0 * params.c);
    // Normal-theory standard errors.
    let se_var_w = var_w * (2.0 / (b - 1.0)).sqrt();
    let se_var_v = var_v * (2.0 / (b - 1.0)).sqrt();
    let se_correlation = (1.0 - correlation * correlation) / (b - 1.0).sqrt();
    let z_var_w = (var_w - target_variance) / se_var_w;
    let z_var_v = (var_v - target_variance) / se_var_v;
    let z_correlation = correlation / se_correlation;
    let passed = [z_var_w, z_var_v, z_correlation].iter().all(|z| z.abs() <= Z_THRESHOLD);
    Ok(WnVnReport {
        paths,
        target_variance,
        var_w,
        var_v,
        se_var_w,
        se_var_v,
        correlation,
        se_correlation,
        z_var_w,
        z_var_v,
        z_correlation,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub n: usize,
    pub k_n: f64,
    pub r_n: f64,
    /// `k_n r_n^{alpha^2 / (4d)} / n`
    pub second_moment_ratio: f64,
    /// `k_n r_n^{alpha^2 / d} / n`
    pub fourth_moment_ratio: f64,
    /// Set when either ratio is at least 0.5.
    pub questionable: bool,
    pub note: String,
}

pub const RATE_FLAG: f64 = 0.5;

pub fn check_rate_condition(params: &ModelParams) -> Result<RateReport> {
    params.validate()?;
    let k = params.k_n()?;
    let log_r = params.log_r_n()?;
    let n = params.n as f64;
    let a2 = params.alpha * params.alpha;
    let second = (k.ln() + a2 / (4.0 * params.d) * log_r - n.ln()).exp();
    let fourth = (k.ln() + a2 / params.d * log_r - n.ln()).exp();
    let questionable = second >= RATE_FLAG || fourth >= RATE_FLAG;
    let note = if questionable {
        format!("asymptotic regime questionable at n = {}", params.n)
    } else {
        "rate separation adequate".to_string()
    };
    Ok(RateReport {
        n: params.n,
        k_n: k,
        r_n: log_r.exp(),
        second_moment_ratio: second,
        fourth_moment_ratio: fourth,
        questionable,
        note,
    })
}

/// Settings of the full verification suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub alpha: f64,
    pub phi: f64,
    pub draws: usize,
    pub seed: u64,
    /// Paths per grid point of the convergence check.
    pub convergence_paths: usize,
    /// Paths of the `(W_n, V_n)` check.
    pub wnvn_paths: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { alpha: 0.5, phi: 0.9, draws: MIN_DRAWS, seed: 0x5eed, convergence_paths: 200, wnvn_paths: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config: VerifyConfig,
    pub moment_checks: Vec<MomentCheck>,
    pub convergence: Vec<ConvergenceReport>,
    pub wnvn: Vec<WnVnReport>,
    /// Diagnostic only; never fails the suite.
    pub rate: Vec<RateReport>,
    pub passed: bool,
}

/// Runs every check. With `alpha = 0` all moment checks are exact.
pub fn verify_suite(config: &VerifyConfig) -> Result<VerifyReport> {
    let VerifyConfig { alpha, phi, draws, seed, convergence_paths, wnvn_paths } = *config;
    let mut moment_checks = vec![
        check_mean_sigma2(alpha, phi, 3, draws, seed)?,
        check_mean_sigma2(alpha, phi, 1, draws, seed.wrapping_add(1))?,
        check_mean_sigma2(alpha, phi, 25, draws, seed.wrapping_add(2))?,
        check_fourth_moment(alpha, 0.5, 2, draws, seed.wrapping_add(3))?,
        check_fourth_moment(alpha, phi, 10, draws, seed.wrapping_add(4))?,
        check_cross_moment(alpha, phi, 2, 4, draws, seed.wrapping_add(5))?,
        check_cross_moment(alpha, 0.1, 2, 40, draws, seed.wrapping_add(6))?,
    ];
    moment_checks.extend(check_conditional_mean(alpha, phi, draws, seed.wrapping_add(7))?);

    let convergence = vec![
        check_sum_squares_convergence(&sum_squares_grid(1.0, 1.0, 0.0), convergence_paths, seed.wrapping_add(20))?,
        check_sum_squares_convergence(&sum_squares_grid(1.0, 1.0, alpha), convergence_paths, seed.wrapping_add(21))?,
    ];

    let explosive = ModelParams {
        c: 0.5,
        d: 1.0,
        alpha,
        n: 300,
        kn: SequenceSpec::PowerOfN(0.5),
        regime: Regime::MildlyExplosive,
        ..ModelParams::default()
    };
    let wnvn = vec![check_wnvn(&explosive, wnvn_paths, seed.wrapping_add(30))?];

    let rate = [SequenceSpec::PowerOfN(0.25), SequenceSpec::LinearN]
        .into_iter()
        .map(|kn| check_rate_condition(&ModelParams { alpha, kn, ..ModelParams::default() }))
        .collect::<Result<Vec<_>>>()?;

    let passed =
        moment_checks.iter().all(|m| m.passed) && convergence.iter().all(|c| c.passed) && wnvn.iter().all(|w| w.passed);
    Ok(VerifyReport { config: *config, moment_checks, convergence, wnvn, rate, passed })
}
