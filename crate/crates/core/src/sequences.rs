//! Sample-size indexed rate sequences, model parameterization and the
//! closed-form volatility scales used to normalize the statistics.
//!
//! The mean root is `rho_n = 1 -/+ c / k_n` and the log-volatility root is
//! `phi_n = 1 - d / log r_n`. Every exponential-scale quantity is carried in
//! log space first; the direct-space accessors simply exponentiate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest sample size at which every sequence kind is defined.
pub const MIN_SAMPLE_SIZE: usize = 3;

/// Symbolic rate sequence evaluated at a sample size `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum SequenceSpec {
    Constant(f64),
    LogOfN,
    /// `n^a` with `a` in `(0, 1]`.
    PowerOfN(f64),
    LinearN,
}

impl SequenceSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SequenceSpec::Constant(v) if !(v.is_finite() && v >= 1.0) => {
                Err(Error::Domain(format!("constant sequence value must be finite and >= 1, got {v}")))
            }
            SequenceSpec::PowerOfN(a) if !(a > 0.0 && a <= 1.0) => {
                Err(Error::Domain(format!("power sequence exponent must lie in (0, 1], got {a}")))
            }
            _ => Ok(()),
        }
    }

    /// Value of the sequence at sample size `n`.
    pub fn eval(&self, n: usize) -> Result<f64> {
        if n < MIN_SAMPLE_SIZE {
            return Err(Error::Domain(format!("sequences are evaluated at n >= {MIN_SAMPLE_SIZE}, got n = {n}")));
        }
        self.validate()?;
        let nf = n as f64;
        Ok(match *self {
            SequenceSpec::Constant(v) => v,
            SequenceSpec::LogOfN => nf.ln(),
            SequenceSpec::PowerOfN(1.0) => nf,
            SequenceSpec::PowerOfN(a) => nf.powf(a),
            SequenceSpec::LinearN => nf,
        })
    }

    /// Natural log of the sequence at `n`.
    pub fn ln_eval(&self, n: usize) -> Result<f64> {
        let v = self.eval(n)?;
        Ok(match *self {
            SequenceSpec::PowerOfN(a) => a * (n as f64).ln(),
            _ => v.ln(),
        })
    }

    /// Row label in the style of the published tables.
    pub fn label(&self) -> String {
        match *self {
            SequenceSpec::Constant(_) => "constant".to_string(),
            SequenceSpec::LogOfN => "log n".to_string(),
            SequenceSpec::PowerOfN(1.0) => "n".to_string(),
            SequenceSpec::PowerOfN(a) => format!("n^{a}"),
            SequenceSpec::LinearN => "n".to_string(),
        }
    }

    /// Smallest integer `n >= 3` at which `log(self(n)) > d`, if any.
    fn min_n_for_log_above(&self, d: f64) -> Option<f64> {
        let threshold = match *self {
            SequenceSpec::Constant(v) => return (v.ln() > d).then_some(MIN_SAMPLE_SIZE as f64),
            SequenceSpec::LogOfN => d.exp().exp(),
            SequenceSpec::PowerOfN(a) => (d / a).exp(),
            SequenceSpec::LinearN => d.exp(),
        };
        Some((threshold.floor() + 1.0).max(MIN_SAMPLE_SIZE as f64))
    }
}

/// Flag syntax: `const:v`, `log`, `pow:a`, `lin`.
impl fmt::Display for SequenceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SequenceSpec::Constant(v) => write!(f, "const:{v}"),
            SequenceSpec::LogOfN => write!(f, "log"),
            SequenceSpec::PowerOfN(a) => write!(f, "pow:{a}"),
            SequenceSpec::LinearN => write!(f, "lin"),
        }
    }
}

impl FromStr for SequenceSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Usage(format!("unrecognized sequence '{s}' (expected const:v, log, pow:a or lin)"));
        let spec = match s.split_once(':') {
            None => match s {
                "log" => SequenceSpec::LogOfN,
                "lin" => SequenceSpec::LinearN,
                _ => return Err(bad()),
            },
            Some(("const", v)) => SequenceSpec::Constant(v.parse().map_err(|_| bad())?),
            Some(("pow", a)) => SequenceSpec::PowerOfN(a.parse().map_err(|_| bad())?),
            Some(_) => return Err(bad()),
        };
        spec.validate().map_err(|e| Error::Usage(e.to_string()))?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `rho_n = 1 - c / k_n`
    NearStationary,
    /// `rho_n = 1 + c / k_n`
    MildlyExplosive,
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stat" | "near_stationary" => Ok(Regime::NearStationary),
            "expl" | "mildly_explosive" => Ok(Regime::MildlyExplosive),
            _ => Err(Error::Usage(format!("unrecognized regime '{s}' (expected stat or expl)"))),
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::NearStationary => "stat",
            Regime::MildlyExplosive => "expl",
        })
    }
}

/// Full parameterization of the data generating process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Mean localization constant.
    pub c: f64,
    /// Volatility localization constant.
    pub d: f64,
    /// Standard deviation of the log-variance shocks.
    pub alpha: f64,
    pub n: usize,
    pub kn: SequenceSpec,
    pub rn: SequenceSpec,
    pub regime: Regime,
    pub y0: f64,
    /// Initial log-variance; `0` means `sigma_0 = 1`.
    pub z0: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            d: 1.0,
            alpha: 0.0,
            n: 1000,
            kn: SequenceSpec::PowerOfN(0.25),
            rn: SequenceSpec::LogOfN,
            regime: Regime::NearStationary,
            y0: 0.0,
            z0: 0.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c >= 0.0) {
            return Err(Error::Domain(format!("c must be finite and nonnegative, got {}", self.c)));
        }
        if !(self.d.is_finite() && self.d > 0.0) {
            return Err(Error::Domain(format!("d must be finite and positive, got {}", self.d)));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::Domain(format!("alpha must be finite and nonnegative, got {}", self.alpha)));
        }
        if !(self.y0.is_finite() && self.z0.is_finite()) {
            return Err(Error::Domain("initial conditions must be finite".to_string()));
        }
        if self.n < MIN_SAMPLE_SIZE {
            return Err(Error::Domain(format!("sample size must be at least {MIN_SAMPLE_SIZE}, got {}", self.n)));
        }
        self.kn.validate()?;
        self.rn.validate()
    }

    pub fn k_n(&self) -> Result<f64> {
        self.kn.eval(self.n)
    }

    pub fn log_r_n(&self) -> Result<f64> {
        self.rn.ln_eval(self.n)
    }

    /// Autoregressive root of the mean equation.
    pub fn rho_n(&self) -> Result<f64> {
        self.validate()?;
        let k = self.k_n()?;
        match self.regime {
            Regime::NearStationary => {
                if k <= self.c {
                    return Err(Error::Domain(format!(
                        "near-stationary root needs k_n > c, got k_n = {k} and c = {}",
                        self.c
                    )));
                }
                Ok(1.0 - self.c / k)
            }
            Regime::MildlyExplosive => Ok(1.0 + self.c / k),
        }
    }

    /// Natural log of `rho_n`, accurate for roots close to one.
    pub fn ln_rho_n(&self) -> Result<f64> {
        let k = self.k_n()?;
        self.rho_n()?;
        Ok(match self.regime {
            Regime::NearStationary => (-self.c / k).ln_1p(),
            Regime::MildlyExplosive => (self.c / k).ln_1p(),
        })
    }

    /// Persistence of the log-variance recursion.
    pub fn phi_n(&self) -> Result<f64> {
        self.validate()?;
        let log_r = self.log_r_n()?;
        if log_r <= self.d {
            let hint = match self.rn.min_n_for_log_above(self.d) {
                Some(m) => format!("the minimum admissible n for r_n = {} is {m}", self.rn),
                None => format!("no n is admissible for constant r_n = {}", self.rn),
            };
            return Err(Error::Domain(format!(
                "phi_n needs log r_n > d, got log r_n = {log_r:.6} at n = {} with d = {}; {hint}",
                self.n, self.d
            )));
        }
        Ok(1.0 - self.d / log_r)
    }

    pub fn scales(&self) -> Result<VolatilityScales> {
        let phi = self.phi_n()?;
        let log_r = self.log_r_n()?;
        Ok(VolatilityScales::new(phi, self.alpha, self.n, log_r, self.d))
    }
}

/// Numerically stable `log(sum(exp(v)))`.
pub fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Closed-form scales of the log-normal volatility process with `z_0 = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VolatilityScales {
    pub phi: f64,
    pub alpha: f64,
    pub n: usize,
    /// `log m_n`, where `m_n` is the average unconditional variance over `t = 1..n`.
    pub log_m_n: f64,
    /// `log l_n = alpha^2 / (2 (1 - phi^2))`.
    pub log_l_n: f64,
    /// Dependence cutoff `M_n`.
    pub cutoff: u64,
    pub delta_n: f64,
    /// `Z_n = phi^2`.
    pub z_n: f64,
}

impl VolatilityScales {
    pub fn new(phi: f64, alpha: f64, n: usize, log_r: f64, d: f64) -> Self {
        let mut s = Self {
            phi,
            alpha,
            n,
            log_m_n: 0.0,
            log_l_n: alpha * alpha * Self::a_limit(phi),
            cutoff: 0,
            delta_n: 1.0,
            z_n: phi * phi,
        };
        s.log_m_n = log_sum_exp((1..=n).map(|t| s.log_x(t))) - (n as f64).ln();

        let lnln_r = log_r.ln();
        s.delta_n = if lnln_r <= 1.0 { 1.0 } else { (1.0 / lnln_r).min(1.0) };
        let m = (log_r / (2.0 * d)) * (log_r / s.delta_n).ln();
        s.cutoff = if m.is_finite() && m > 0.0 { m.floor() as u64 } else { 0 };
        s
    }

    fn a_limit(phi: f64) -> f64 {
        0.5 / ((1.0 - phi) * (1.0 + phi))
    }

    /// Dispersion factor `A_t = (1 - phi^{2t}) / (2 (1 - phi^2))`.
    pub fn a(&self, t: usize) -> f64 {
        let one_minus_pow = -(2.0 * t as f64 * self.phi.ln()).exp_m1();
        one_minus_pow * Self::a_limit(self.phi)
    }

    /// `A_infinity = 1 / (2 (1 - phi^2))`.
    pub fn a_inf(&self) -> f64 {
        Self::a_limit(self.phi)
    }

    /// `log x_t = alpha^2 A_t`.
    pub fn log_x(&self, t: usize) -> f64 {
        self.alpha * self.alpha * self.a(t)
    }

    /// `x_t = E[sigma_t^2]`.
    pub fn x(&self, t: usize) -> f64 {
        self.log_x(t).exp()
    }

    pub fn m_n(&self) -> f64 {
        self.log_m_n.exp()
    }

    /// `m_n` summed directly in linear space; infinite once `x_t` overflows.
    pub fn m_n_direct(&self) -> f64 {
        (1..=self.n).map(|t| self.x(t)).sum::<f64>() / self.n as f64
    }

    pub fn l_n(&self) -> f64 {
        self.log_l_n.exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::default()
    }

    #[test]
    fn eval_sequence_examples() {
        assert!((SequenceSpec::LogOfN.eval(20).unwrap() - 20f64.ln()).abs() < 1e-15);
        assert!((SequenceSpec::LogOfN.eval(20).unwrap() - 2.9957).abs() < 1e-4);
        assert!((SequenceSpec::PowerOfN(0.5).eval(100).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(SequenceSpec::LinearN.eval(300).unwrap(), 300.0);
        assert_eq!(SequenceSpec::Constant(4.5).eval(3).unwrap(), 4.5);
    }

    #[test]
    fn eval_sequence_rejects_small_n() {
        for spec in [SequenceSpec::LogOfN, SequenceSpec::LinearN, SequenceSpec::Constant(2.0)] {
            assert!(matches!(spec.eval(2), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn power_one_matches_linear() {
        for n in [3, 17, 1000, 123_457] {
            assert_eq!(SequenceSpec::PowerOfN(1.0).eval(n).unwrap(), SequenceSpec::LinearN.eval(n).unwrap());
        }
    }

    #[test]
    fn sequence_flag_syntax() {
        for s in ["const:10", "log", "pow:0.25", "lin"] {
            let spec: SequenceSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("pow:1.5".parse::<SequenceSpec>().is_err());
        assert!("const:0.5".parse::<SequenceSpec>().is_err());
        assert!("sqrt".parse::<SequenceSpec>().is_err());
    }

    #[test]
    fn rho_examples() {
        let p = ModelParams { c: 1.0, kn: SequenceSpec::PowerOfN(0.25), n: 10_000, ..params() };
        assert!((p.rho_n().unwrap() - 0.9).abs() < 1e-15);

        let p = ModelParams {
            c: 0.5,
            kn: SequenceSpec::PowerOfN(0.5),
            n: 300,
            regime: Regime::MildlyExplosive,
            ..params()
        };
        assert!((p.rho_n().unwrap() - (1.0 + 0.5 / 300f64.sqrt())).abs() < 1e-15);
        assert!((p.rho_n().unwrap() - 1.028868).abs() < 1e-6);

        for regime in [Regime::NearStationary, Regime::MildlyExplosive] {
            let p = ModelParams { c: 0.0, regime, ..params() };
            assert_eq!(p.rho_n().unwrap(), 1.0);
        }
    }

    #[test]
    fn rho_rejects_k_below_c() {
        let p = ModelParams { c: 3.0, kn: SequenceSpec::Constant(2.0), ..params() };
        assert!(matches!(p.rho_n(), Err(Error::Domain(_))));
        let p = ModelParams { regime: Regime::MildlyExplosive, ..p };
        assert!(p.rho_n().is_ok());
    }

    #[test]
    fn phi_examples() {
        // n = e^{e^2} ~ 1618.18 rounded down, so log log n is just below 2.
        let p = ModelParams { d: 1.0, n: 1618, ..params() };
        assert!((p.phi_n().unwrap() - 0.5).abs() < 1e-4);

        let p = ModelParams { d: 0.001, n: 10_000, ..params() };
        let expected = 1.0 - 0.001 / (10_000f64).ln().ln();
        assert!((p.phi_n().unwrap() - expected).abs() < 1e-15);
        assert!((p.phi_n().unwrap() - 0.999_549_615_850_634).abs() < 1e-14);
    }

    #[test]
    fn phi_error_names_minimum_n() {
        let p = ModelParams { d: 1.0, n: 15, ..params() };
        let err = p.phi_n().unwrap_err().to_string();
        assert!(err.contains("minimum admissible n"), "{err}");
        assert!(err.contains("16"), "{err}");
        let p = ModelParams { n: 16, ..p };
        assert!(p.phi_n().unwrap() > 0.0);
    }

    #[test]
    fn scales_homoskedastic_collapse() {
        let p = ModelParams { alpha: 0.0, n: 500, ..params() };
        let s = p.scales().unwrap();
        assert!((1..=500).all(|t| s.x(t) == 1.0));
        assert_eq!(s.m_n(), 1.0);
        assert_eq!(s.l_n(), 1.0);
    }

    #[test]
    fn scales_first_dispersion_is_half() {
        for phi in [0.01, 0.5, 0.9, 0.999] {
            let s = VolatilityScales::new(phi, 0.7, 10, 2.0, 1.0);
            assert!((s.a(1) - 0.5).abs() < 1e-15, "phi = {phi}");
        }
    }

    #[test]
    fn scales_closed_form_example() {
        let s = VolatilityScales::new(0.9, 0.5, 10, 2.0, 1.0);
        let a3 = (1.0 - 0.9f64.powi(6)) / (2.0 * (1.0 - 0.81));
        assert!((s.a(3) - a3).abs() < 1e-14);
        assert!((s.a(3) - 1.233050).abs() < 1e-6);
        assert!((s.x(3) - 1.361_058_219_831_25).abs() < 1e-13);
    }

    #[test]
    fn m_n_log_space_matches_direct() {
        for (phi, alpha, n) in [(0.5, 0.5, 1000), (0.9, 1.0, 300), (0.99, 2.0, 5000)] {
            let s = VolatilityScales::new(phi, alpha, n, 2.0, 1.0);
            let direct = s.m_n_direct();
            assert!(((s.m_n() - direct) / direct).abs() < 1e-12);
        }
    }

    #[test]
    fn log_space_survives_direct_overflow() {
        let s = VolatilityScales::new(0.9999, 30.0, 10_000, 2.0, 1.0);
        assert!(s.m_n_direct().is_infinite());
        assert!(s.log_m_n.is_finite());
        assert!(s.log_l_n.is_finite());
        assert!(s.log_m_n <= s.log_l_n);
    }

    #[test]
    fn cutoff_quantities() {
        // log r_n = e^3: log log r_n = 3, delta_n = 1/3.
        let log_r = 3f64.exp();
        let s = VolatilityScales::new(1.0 - 1.0 / log_r, 0.5, 100, log_r, 1.0);
        assert!((s.delta_n - 1.0 / 3.0).abs() < 1e-15);
        let m = (log_r / 2.0) * (log_r * 3.0).ln();
        assert_eq!(s.cutoff, m.floor() as u64);
        assert!((s.z_n - s.phi * s.phi).abs() < 1e-15);
        // phi^{2 M_n} <= delta_n / log r_n
        assert!(s.z_n.powi(s.cutoff as i32) <= s.delta_n / log_r * (1.0 + 1e-12));

        let s = VolatilityScales::new(0.5, 0.5, 100, 2.0, 1.0);
        assert_eq!(s.delta_n, 1.0);
    }

    #[test]
    fn log_sum_exp_basics() {
        assert!((log_sum_exp([0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
        assert!((log_sum_exp([1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(std::iter::empty()), f64::NEG_INFINITY);
    }
}
