//! Market parameters and shared-driver path generation.
//!
//! Both assets follow geometric Brownian motions driven by the same Wiener
//! process:
//!
//! ```text
//! dS1 = mu1 S1 dt + sigma1 S1 dW,    dS2 = mu2 S2 dt + sigma2 S2 dW.
//! ```
//!
//! Paths use the exact lognormal update, so the only error in a hedging
//! simulation comes from discrete rebalancing.
//!
//! # Reproducibility
//!
//! Path `i` of an ensemble draws from a ChaCha8 stream seeded with `seed` and
//! positioned on stream number `i`; normals come from `rand_distr`'s ziggurat
//! `StandardNormal`. Ensembles are therefore bit-identical for equal seeds,
//! independent of thread count and scheduling.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Drifts, volatilities and the riskless rate, all per year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    pub mu1: f64,
    pub mu2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub r: f64,
}

impl MarketParams {
    pub fn new(mu1: f64, mu2: f64, sigma1: f64, sigma2: f64, r: f64) -> Result<Self> {
        let p = Self { mu1, mu2, sigma1, sigma2, r };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.mu1, self.mu2, self.sigma1, self.sigma2, self.r];
        ensure(all.iter().all(|x| x.is_finite()), || {
            "market parameters must be finite".into()
        })?;
        ensure(self.sigma1 > 0.0, || format!("sigma1 must be positive, got {}", self.sigma1))?;
        ensure(self.sigma2 > 0.0, || format!("sigma2 must be positive, got {}", self.sigma2))?;
        // Assets with equal volatility are the same asset up to drift.
        ensure(self.sigma1 != self.sigma2, || {
            format!("sigma1 and sigma2 must differ, both are {}", self.sigma1)
        })
    }

    /// `(mu_i - r) / sigma_i`, the market price of risk of asset `i` (1 or 2).
    pub fn cost_of_risk(&self, asset: usize) -> f64 {
        match asset {
            1 => (self.mu1 - self.r) / self.sigma1,
            2 => (self.mu2 - self.r) / self.sigma2,
            _ => panic!("asset index must be 1 or 2, got {asset}"),
        }
    }

    pub fn sharpe_gap(&self) -> f64 {
        sharpe_gap(self)
    }
}

/// Coefficient of `delta2 * S2` in the two-asset pricing equation:
/// `mu1 sigma2/sigma1 - mu2 - r sigma2/sigma1 + r`.
///
/// Equals `sigma2` times the difference of the two market prices of risk, so
/// it vanishes exactly when the market is arbitrage-free.
pub fn sharpe_gap(params: &MarketParams) -> f64 {
    let ratio = params.sigma2 / params.sigma1;
    params.mu1 * ratio - params.mu2 - params.r * ratio + params.r
}

/// One exact lognormal step of a GBM with standard normal draw `z`.
#[inline]
pub fn gbm_step(s: f64, mu: f64, sigma: f64, dt: f64, z: f64) -> f64 {
    s * ((mu - 0.5 * sigma * sigma) * dt + sigma * dt.sqrt() * z).exp()
}

/// Monte Carlo trajectories of `(S1, S2)` sharing one Wiener driver.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub times: Vec<f64>,
    pub s1: Vec<Vec<f64>>,
    pub s2: Vec<Vec<f64>>,
    pub seed: u64,
}

impl PathEnsemble {
    pub fn n_paths(&self) -> usize {
        self.s1.len()
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("ensemble has at least one time")
    }

    /// Every `stride`-th time of each path. The update is exact, so the
    /// result is a valid ensemble on the coarser grid.
    pub fn subsample(&self, stride: usize) -> Result<Self> {
        ensure(stride >= 1 && self.n_steps().is_multiple_of(stride), || {
            format!("stride {stride} does not divide {} steps", self.n_steps())
        })?;
        let pick = |v: &Vec<f64>| v.iter().step_by(stride).copied().collect::<Vec<_>>();
        Ok(Self {
            times: pick(&self.times),
            s1: self.s1.iter().map(pick).collect(),
            s2: self.s2.iter().map(pick).collect(),
            seed: self.seed,
        })
    }

    /// CSV with columns `time,path_id,s1,s2`, one row per path and time.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,path_id,s1,s2")?;
        for (p, (a, b)) in self.s1.iter().zip(&self.s2).enumerate() {
            for (k, t) in self.times.iter().enumerate() {
                writeln!(w, "{t},{p},{},{}", a[k], b[k])?;
            }
        }
        Ok(())
    }
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// Simulate `n_paths` paths of both assets on a uniform grid of `n_steps` steps.
pub fn simulate_paths(
    params: &MarketParams,
    s1_0: f64,
    s2_0: f64,
    horizon: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    params.validate()?;
    ensure(s1_0 > 0.0 && s1_0.is_finite(), || format!("s1_0 must be positive, got {s1_0}"))?;
    ensure(s2_0 > 0.0 && s2_0.is_finite(), || format!("s2_0 must be positive, got {s2_0}"))?;
    ensure(horizon > 0.0 && horizon.is_finite(), || {
        format!("horizon must be positive, got {horizon}")
    })?;
    ensure(n_steps >= 1, || "n_steps must be at least 1".into())?;
    ensure(n_paths >= 1, || "n_paths must be at least 1".into())?;

    let dt = horizon / n_steps as f64;
    let times: Vec<f64> = (0..=n_steps).map(|k| k as f64 * dt).collect();

    let (s1, s2): (Vec<_>, Vec<_>) = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p);
            let mut a = Vec::with_capacity(n_steps + 1);
            let mut b = Vec::with_capacity(n_steps + 1);
            a.push(s1_0);
            b.push(s2_0);
            for k in 0..n_steps {
                let z: f64 = StandardNormal.sample(&mut rng);
                a.push(gbm_step(a[k], params.mu1, params.sigma1, dt, z));
                b.push(gbm_step(b[k], params.mu2, params.sigma2, dt, z));
            }
            (a, b)
        })
        .unzip();

    if s1.iter().chain(&s2).flatten().any(|x| !x.is_finite() || *x <= 0.0) {
        return Err(Error::InvalidInput(
            "path generation left the positive reals; reduce the horizon or volatility".into(),
        ));
    }

    Ok(PathEnsemble { times, s1, s2, seed })
}

/// Standardised Wiener increment implied by a log-price move.
pub fn implied_increment(s_from: f64, s_to: f64, mu: f64, sigma: f64, dt: f64) -> f64 {
    ((s_to / s_from).ln() - (mu - 0.5 * sigma * sigma) * dt) / sigma
}
