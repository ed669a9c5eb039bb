//! Reproducible sample paths of
//!
//! ```text
//! y_t = rho_n y_{t-1} + sigma_t eps_t
//! log sigma_t^2 = phi_n log sigma_{t-1}^2 + eta_t,   eta_t ~ N(0, alpha^2)
//! ```
//!
//! Every Gaussian series is drawn from its own ChaCha8 keystream, keyed by the
//! seed base and a series id and selected by the replication stream. A path
//! therefore depends only on `(base, stream)`, never on which thread or in
//! which order it was produced.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequences::ModelParams;

const KEY_TAG: &[u8; 16] = b"dl2u/gauss/v1\0\0\0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub base: u64,
    /// Replication index.
    pub stream: u64,
}

impl RngSeed {
    pub fn new(base: u64, stream: u64) -> Self {
        Self { base, stream }
    }
}

/// Independent Gaussian series carried by a single seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Series {
    /// Mean innovations `eps_t`.
    Innovation = 0,
    /// Log-variance shocks before scaling by `alpha`.
    Volatility = 1,
    /// Draws for the moment oracles.
    Oracle = 2,
}

/// Standard normal draws for one `(seed, series)` substream.
#[derive(Debug, Clone)]
pub struct GaussianStream {
    rng: ChaCha8Rng,
}

impl GaussianStream {
    pub fn new(seed: RngSeed, series: Series) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.base.to_le_bytes());
        key[8..16].copy_from_slice(&(series as u64).to_le_bytes());
        key[16..].copy_from_slice(KEY_TAG);
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(seed.stream);
        Self { rng }
    }

    #[inline]
    pub fn draw(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

impl Iterator for GaussianStream {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.draw())
    }
}

/// Resolved coefficients of the recursion, independent of any rate sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub rho: f64,
    pub phi: f64,
    pub alpha: f64,
    pub y0: f64,
    pub z0: f64,
}

impl Coefficients {
    /// With `alpha = 0` and `z0 = 0` the log-variance stays at zero whatever
    /// `phi_n` is, so an undefined `phi_n` (small `n`) is not an error there.
    pub fn from_params(params: &ModelParams) -> Result<Self> {
        let phi = match params.phi_n() {
            Err(Error::Domain(_)) if params.alpha == 0.0 && params.z0 == 0.0 => 0.0,
            other => other?,
        };
        Ok(Self { rho: params.rho_n()?, phi, alpha: params.alpha, y0: params.y0, z0: params.z0 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedPath {
    /// `y_0..=y_n`
    pub y: Vec<f64>,
    /// `sigma_0^2..=sigma_n^2`
    pub sigma2: Vec<f64>,
    /// `u_1..=u_n`, stored as generated; `u[t - 1]` is `u_t`.
    pub u: Vec<f64>,
}

impl SimulatedPath {
    /// Number of transitions `n`.
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// `sigma_t^2` for `t = 0..=len`.
pub fn simulate_volatility_with(coef: &Coefficients, len: usize, seed: RngSeed) -> Vec<f64> {
    let mut out = Vec::with_capacity(len + 1);
    let mut z = coef.z0;
    out.push(z.exp());
    if coef.alpha == 0.0 {
        for _ in 0..len {
            z *= coef.phi;
            out.push(z.exp());
        }
        return out;
    }
    let mut eta = GaussianStream::new(seed, Series::Volatility);
    for _ in 0..len {
        z = coef.phi * z + coef.alpha * eta.draw();
        out.push(z.exp());
    }
    out
}

pub fn simulate_volatility(params: &ModelParams, seed: RngSeed) -> Result<Vec<f64>> {
    let coef = Coefficients::from_params(params)?;
    Ok(simulate_volatility_with(&coef, params.n, seed))
}

/// Path of length `len` from resolved coefficients. `len = 0` yields `y = [y0]`.
pub fn simulate_path_with(coef: &Coefficients, len: usize, seed: RngSeed) -> Result<SimulatedPath> {
    let sigma2 = simulate_volatility_with(coef, len, seed);
    let mut eps = GaussianStream::new(seed, Series::Innovation);
    let mut y = Vec::with_capacity(len + 1);
    let mut u = Vec::with_capacity(len);
    let mut prev = coef.y0;
    y.push(prev);
    for (t, s2) in sigma2.iter().enumerate().skip(1) {
        let shock = s2.sqrt() * eps.draw();
        let level = coef.rho * prev + shock;
        if !level.is_finite() {
            return Err(Error::PathOverflow { t });
        }
        u.push(shock);
        y.push(level);
        prev = level;
    }
    Ok(SimulatedPath { y, sigma2, u })
}

pub fn simulate_path(params: &ModelParams, seed: RngSeed) -> Result<SimulatedPath> {
    let coef = Coefficients::from_params(params)?;
    simulate_path_with(&coef, params.n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequences::{Regime, SequenceSpec};

    fn params() -> ModelParams {
        ModelParams { n: 200, alpha: 0.5, ..ModelParams::default() }
    }

    #[test]
    fn homoskedastic_volatility_is_one() {
        let p = ModelParams { alpha: 0.0, n: 50, ..params() };
        let s = simulate_volatility(&p, RngSeed::new(3, 0)).unwrap();
        assert_eq!(s.len(), 51);
        assert!(s.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn volatility_deterministic() {
        let p = ModelParams { n: 10, d: 0.5, ..params() };
        let a = simulate_volatility(&p, RngSeed::new(9, 4)).unwrap();
        let b = simulate_volatility(&p, RngSeed::new(9, 4)).unwrap();
        assert_eq!(a.len(), 11);
        assert_eq!(a, b);
        let c = simulate_volatility(&p, RngSeed::new(9, 5)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn recursions_hold_exactly() {
        let p = params();
        let coef = Coefficients::from_params(&p).unwrap();
        let path = simulate_path(&p, RngSeed::new(1, 2)).unwrap();
        assert_eq!(path.y.len(), p.n + 1);
        assert_eq!(path.sigma2.len(), p.n + 1);
        assert_eq!(path.u.len(), p.n);
        assert_eq!(path.sigma2[0], 1.0);
        for t in 1..=p.n {
            assert_eq!(path.y[t], coef.rho * path.y[t - 1] + path.u[t - 1]);
            assert!(path.sigma2[t] > 0.0);
        }
        // The log-variance recursion is replayed from the same eta stream.
        let mut eta = GaussianStream::new(RngSeed::new(1, 2), Series::Volatility);
        let mut z = 0.0;
        for t in 1..=p.n {
            z = coef.phi * z + coef.alpha * eta.draw();
            assert_eq!(path.sigma2[t], z.exp());
        }
    }

    #[test]
    fn homoskedastic_path_has_u_equal_eps() {
        let p = ModelParams { alpha: 0.0, c: 1.0, kn: SequenceSpec::PowerOfN(0.25), ..params() };
        let path = simulate_path(&p, RngSeed::new(5, 0)).unwrap();
        let eps: Vec<f64> = GaussianStream::new(RngSeed::new(5, 0), Series::Innovation).take(p.n).collect();
        assert!(path.sigma2.iter().all(|&s| s == 1.0));
        assert_eq!(path.u, eps);
    }

    #[test]
    fn empty_recursion() {
        let coef = Coefficients { rho: 0.9, phi: 0.5, alpha: 0.5, y0: 5.0, z0: 0.0 };
        let path = simulate_path_with(&coef, 0, RngSeed::new(0, 0)).unwrap();
        assert_eq!(path.y, vec![5.0]);
        assert!(path.u.is_empty());
        assert_eq!(path.sigma2, vec![1.0]);
    }

    #[test]
    fn explosive_overflow_reports_index() {
        let coef = Coefficients { rho: 10.0, phi: 0.5, alpha: 0.0, y0: 1.0, z0: 0.0 };
        match simulate_path_with(&coef, 1000, RngSeed::new(0, 0)) {
            Err(Error::PathOverflow { t }) => assert!((300..=320).contains(&t), "t = {t}"),
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn homoskedastic_small_n_ignores_phi() {
        let p = ModelParams { n: 3, alpha: 0.0, d: 1.0, ..params() };
        assert!(p.phi_n().is_err());
        let path = simulate_path(&p, RngSeed::new(0, 0)).unwrap();
        assert_eq!(path.y.len(), 4);
        assert!(path.sigma2.iter().all(|&s| s == 1.0));
        let p = ModelParams { z0: 0.5, ..p };
        assert!(matches!(simulate_path(&p, RngSeed::new(0, 0)), Err(Error::Domain(_))));
    }

    #[test]
    fn domain_errors_propagate() {
        let p = ModelParams { n: 15, d: 1.0, ..params() };
        assert!(matches!(simulate_path(&p, RngSeed::new(0, 0)), Err(Error::Domain(_))));
        let p = ModelParams { regime: Regime::NearStationary, kn: SequenceSpec::Constant(1.0), c: 1.0, ..params() };
        assert!(matches!(simulate_path(&p, RngSeed::new(0, 0)), Err(Error::Domain(_))));
    }
}
