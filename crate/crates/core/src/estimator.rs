//! Least-squares estimation of the autoregressive root and the two
//! normalized pivots.
//!
//! In the explosive regime `rho_hat - rho_n` is of order `rho_n^{-n}`, far
//! below the rounding error of `rho_hat` itself once `rho_n^n` exceeds about
//! `1e16`. Paths therefore carry their innovations, and the deviation is
//! formed from the score `sum y_{t-1} u_t` whenever a path is available.

use serde::{Deserialize, Serialize};

use crate::dgp::SimulatedPath;
use crate::error::{Error, Result};
use crate::ks::TargetLaw;
use crate::sequences::{ModelParams, Regime, VolatilityScales};

/// Sums of squares below this are treated as a degenerate regressor.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-300;

/// Levels above this magnitude are rescaled before forming sums of products.
const RESCALE_ABOVE: f64 = 1e100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OlsResult {
    pub rho_hat: f64,
    /// `sum_{t=1}^n y_{t-1} y_t`, divided by `exp(log_scale)`.
    pub numerator: f64,
    /// `sum_{t=1}^n y_{t-1}^2`, divided by `exp(log_scale)`.
    pub denominator: f64,
    /// Log of the common factor removed from both sums (zero unless the
    /// levels are astronomically large).
    pub log_scale: f64,
    /// `sum_{t=1}^n y_{t-1} u_t` on the same scale, when innovations are known.
    pub score: Option<f64>,
}

impl OlsResult {
    /// `rho_hat - rho`, taken from the innovation score when present.
    pub fn deviation(&self, rho: f64) -> f64 {
        match self.score {
            Some(score) => score / self.denominator,
            None => self.rho_hat - rho,
        }
    }
}

fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn level_scale(y: &[f64]) -> f64 {
    let m = max_abs(y);
    if m > RESCALE_ABOVE {
        m
    } else {
        1.0
    }
}

/// `rho_hat = sum y_{t-1} y_t / sum y_{t-1}^2`.
pub fn ols_rho(y: &[f64]) -> Result<OlsResult> {
    if y.len() < 2 {
        return Err(Error::InvalidInput(format!("OLS needs at least two observations, got {}", y.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("series contains non-finite values".to_string()));
    }
    let scale = level_scale(y);
    let (mut num, mut den) = (0.0, 0.0);
    for w in y.windows(2) {
        let (prev, cur) = (w[0] / scale, w[1] / scale);
        num += prev * cur;
        den += prev * prev;
    }
    let log_scale = 2.0 * scale.ln();
    if den * scale * scale < DEGENERATE_DENOMINATOR {
        return Err(Error::DegeneratePath(den * scale * scale));
    }
    Ok(OlsResult { rho_hat: num / den, numerator: num, denominator: den, log_scale, score: None })
}

/// OLS on a simulated path, carrying the innovation score.
pub fn ols_path(path: &SimulatedPath) -> Result<OlsResult> {
    let mut ols = ols_rho(&path.y)?;
    let scale = (0.5 * ols.log_scale).exp();
    let score = path.y.iter().zip(&path.u).map(|(y, u)| (y / scale) * (u / scale)).sum();
    ols.score = Some(score);
    Ok(ols)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PivotKind {
    /// `sqrt(n k_n) (rho_hat - rho_n)`
    NearStationaryT,
    /// `rho_n^n k_n (rho_hat - rho_n) / (2c)`
    ExplosiveS,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PivotValue {
    pub kind: PivotKind,
    pub value: f64,
    pub target: TargetLaw,
}

impl PivotKind {
    pub fn for_regime(regime: Regime) -> Self {
        match regime {
            Regime::NearStationary => PivotKind::NearStationaryT,
            Regime::MildlyExplosive => PivotKind::ExplosiveS,
        }
    }
}

/// Limit law of the pivot for these parameters.
pub fn target_law(params: &ModelParams) -> Result<TargetLaw> {
    match params.regime {
        Regime::NearStationary => TargetLaw::normal_two_c(params.c),
        Regime::MildlyExplosive => Ok(TargetLaw::StandardCauchy),
    }
}

pub fn pivot_t(ols: &OlsResult, params: &ModelParams) -> Result<PivotValue> {
    if params.regime != Regime::NearStationary {
        return Err(Error::Usage("the T pivot applies to the near-stationary regime".to_string()));
    }
    let rho = params.rho_n()?;
    let k = params.k_n()?;
    let value = (params.n as f64 * k).sqrt() * ols.deviation(rho);
    Ok(PivotValue { kind: PivotKind::NearStationaryT, value, target: target_law(params)? })
}

pub fn pivot_s(ols: &OlsResult, params: &ModelParams) -> Result<PivotValue> {
    if params.regime != Regime::MildlyExplosive {
        return Err(Error::Usage("the S pivot applies to the mildly explosive regime".to_string()));
    }
    if params.c <= 0.0 {
        return Err(Error::Domain("the S pivot needs c > 0".to_string()));
    }
    let rho = params.rho_n()?;
    let log_power = params.n as f64 * params.ln_rho_n()?;
    let log_scale = log_power + params.k_n()?.ln() - (2.0 * params.c).ln();
    let value = scale_in_log_space(ols.deviation(rho), log_scale)
        .ok_or_else(|| Error::Overflow(format!("S pivot overflows with n log rho_n = {log_power:.6}")))?;
    Ok(PivotValue { kind: PivotKind::ExplosiveS, value, target: TargetLaw::StandardCauchy })
}

/// Pivot matching the regime of `params`.
pub fn pivot(ols: &OlsResult, params: &ModelParams) -> Result<PivotValue> {
    match params.regime {
        Regime::NearStationary => pivot_t(ols, params),
        Regime::MildlyExplosive => pivot_s(ols, params),
    }
}

/// `x * exp(log_factor)` without forming `exp(log_factor)` on its own.
fn scale_in_log_space(x: f64, log_factor: f64) -> Option<f64> {
    if x == 0.0 {
        return Some(0.0);
    }
    let v = x.signum() * (x.abs().ln() + log_factor).exp();
    v.is_finite().then_some(v)
}

/// `y*_t = (-1)^t y_t`
pub fn sign_flip(y: &[f64]) -> Vec<f64> {
    y.iter().enumerate().map(|(t, &v)| if t % 2 == 0 { v } else { -v }).collect()
}

/// `sum_{t=1}^n y_t^2 / (n k_n m_n)`
pub fn normalized_sum_squares(path: &SimulatedPath, params: &ModelParams, scales: &VolatilityScales) -> Result<f64> {
    if params.regime != Regime::NearStationary {
        return Err(Error::Usage("normalized sum of squares applies to the near-stationary regime".to_string()));
    }
    let ss: f64 = path.y.iter().skip(1).map(|v| v * v).sum();
    let log_norm = (path.len() as f64).ln() + params.k_n()?.ln() + scales.log_m_n;
    Ok(ss * (-log_norm).exp())
}

/// `(rho^{-n} sum y_{t-1} u_t / (l_n k_n), rho^{-2n} sum_{t=1}^n y_t^2 / (l_n k_n^2))`
pub fn explosive_pair(path: &SimulatedPath, params: &ModelParams, scales: &VolatilityScales) -> Result<(f64, f64)> {
    if params.regime != Regime::MildlyExplosive {
        return Err(Error::Usage("the explosive pair applies to the mildly explosive regime".to_string()));
    }
    let n = path.len() as f64;
    let ln_rho = params.ln_rho_n()?;
    let ln_k = params.k_n()?.ln();

    let ys = level_scale(&path.y);
    let cross: f64 = path.y.iter().zip(&path.u).map(|(y, u)| (y / ys) * u).sum();
    let squares: f64 = path.y.iter().skip(1).map(|y| (y / ys) * (y / ys)).sum();
    let ln_ys = ys.ln();

    let first = scale_in_log_space(cross, ln_ys - n * ln_rho - scales.log_l_n - ln_k);
    let second = scale_in_log_space(squares, 2.0 * ln_ys - 2.0 * n * ln_rho - scales.log_l_n - 2.0 * ln_k);
    match (first, second) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(Error::Overflow(format!("explosive pair overflows with n log rho_n = {:.6}", n * ln_rho))),
    }
}
