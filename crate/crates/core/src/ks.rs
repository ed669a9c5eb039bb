//! Target laws and the one-sample Kolmogorov-Smirnov test.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum TargetLaw {
    /// Centered normal with the given variance.
    Normal {
        variance: f64,
    },
    StandardCauchy,
}

impl TargetLaw {
    /// `N(0, 2c)`, the near-stationary limit.
    pub fn normal_two_c(c: f64) -> Result<Self> {
        Self::normal(2.0 * c)
    }

    pub fn normal(variance: f64) -> Result<Self> {
        if !(variance.is_finite() && variance > 0.0) {
            return Err(Error::Domain(format!("normal target needs a positive variance, got {variance}")));
        }
        Ok(TargetLaw::Normal { variance })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            TargetLaw::Normal { variance } => 0.5 * libm::erfc(-x / variance.sqrt() * FRAC_1_SQRT_2),
            TargetLaw::StandardCauchy => 0.5 + x.atan() / PI,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            TargetLaw::Normal { variance } => (-0.5 * x * x / variance).exp() / (2.0 * PI * variance).sqrt(),
            TargetLaw::StandardCauchy => 1.0 / (PI * (1.0 + x * x)),
        }
    }

    pub fn name(&self) -> String {
        match *self {
            TargetLaw::Normal { variance } => format!("N(0,{variance})"),
            TargetLaw::StandardCauchy => "Cauchy(0,1)".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub d_stat: f64,
    pub p_value: f64,
    pub sample_size: usize,
}

/// Two-sided sup distance between the empirical CDF of `sample` and `cdf`.
pub fn ks_statistic_with(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::InvalidInput("KS statistic of an empty sample".to_string()));
    }
    if sample.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidInput("sample contains NaN".to_string()));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    let d = sorted.iter().enumerate().fold(0.0f64, |acc, (i, &x)| {
        let f = cdf(x);
        let below = f - i as f64 / m;
        let above = (i + 1) as f64 / m - f;
        acc.max(below).max(above)
    });
    Ok(d.clamp(0.0, 1.0))
}

pub fn ks_statistic(sample: &[f64], law: &TargetLaw) -> Result<f64> {
    ks_statistic_with(sample, |x| law.cdf(x))
}

/// Asymptotic Kolmogorov tail probability with Stephens' small-sample factor.
pub fn ks_pvalue(d: f64, m: usize) -> f64 {
    if m == 0 || d.is_nan() || d <= 0.0 {
        return 1.0;
    }
    let sm = (m as f64).sqrt();
    let lambda = (sm + 0.12 + 0.11 / sm) * d.min(1.0);
    kolmogorov_survival(lambda).clamp(0.0, 1.0)
}

/// `Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2)`.
///
/// Below `lambda = 0.5` the alternating series converges slowly, so the
/// equivalent theta-function form of the complementary CDF is summed instead.
fn kolmogorov_survival(lambda: f64) -> f64 {
    const TOL: f64 = 1e-12;
    if lambda < 0.5 {
        let pref = (2.0 * PI).sqrt() / lambda;
        let scale = PI * PI / (8.0 * lambda * lambda);
        let mut cdf = 0.0;
        for j in 1..=50 {
            let odd = (2 * j - 1) as f64;
            let term = (-odd * odd * scale).exp();
            cdf += term;
            if term < TOL * cdf.max(f64::MIN_POSITIVE) {
                break;
            }
        }
        return 1.0 - pref * cdf;
    }
    let l2 = lambda * lambda;
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * l2).exp();
        sum += sign * term;
        if term < TOL {
            break;
        }
        sign = -sign;
    }
    2.0 * sum
}

pub fn ks_test(sample: &[f64], law: &TargetLaw) -> Result<KsResult> {
    let d_stat = ks_statistic(sample, law)?;
    Ok(KsResult { d_stat, p_value: ks_pvalue(d_stat, sample.len()), sample_size: sample.len() })
}
