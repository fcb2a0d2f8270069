//! The two-asset hedge `(delta1, delta2)` and its Monte Carlo replay.
//!
//! `delta2` is the free choice that turns the pricing equation into the
//! semi-linear problem: `delta2 = -e^{-r tau} f(U) / (S2 lambda)` with
//! `U = e^{r tau} V`. `delta1` then cancels the `dW` term of the portfolio.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::black_scholes::{bs_price, QuoteContext, VanillaCall};
use crate::error::{ensure, Error, Result};
use crate::market::{MarketParams, PathEnsemble};
use crate::pde::SolutionSurface;
use crate::sum::NeumaierSum;
use crate::transform::{
    check_in_corridor, cubic_nonlinearity, grid_value_from_price, price_from_grid_value,
    to_computational, ContractSpec, DerivedConstants, Nonlinearity,
};

/// Holdings against one short option and the resulting portfolio value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HedgePosition {
    pub delta1: f64,
    pub delta2: f64,
    /// `V - delta1 S1 - delta2 S2`.
    pub portfolio_value: f64,
}

/// The sharpe gap, or [`Error::SharpeGapZero`] when it vanishes to rounding.
pub fn require_sharpe_gap(params: &MarketParams) -> Result<f64> {
    let ratio = params.sigma2 / params.sigma1;
    let lambda = params.sharpe_gap();
    let scale = (params.mu1 * ratio).abs() + params.mu2.abs() + (params.r * ratio).abs() + params.r.abs();
    if lambda == 0.0 || lambda.abs() <= 64.0 * f64::EPSILON * scale {
        return Err(Error::SharpeGapZero);
    }
    Ok(lambda)
}

/// `delta2 = -e^{-r tau} U (U - A)(U - B) / (S2 lambda)`, `U = e^{r tau} V`.
pub fn compute_delta2(
    v: f64,
    s2: f64,
    tau: f64,
    params: &MarketParams,
    dc: &DerivedConstants,
) -> Result<f64> {
    let lambda = require_sharpe_gap(params)?;
    ensure(s2 > 0.0 && s2.is_finite(), || format!("S2 must be positive, got {s2}"))?;
    let u = grid_value_from_price(v, tau, params.r);
    let f = cubic_nonlinearity(dc).value(u);
    Ok(-(-params.r * tau).exp() * f / (s2 * lambda))
}

/// Zero-rate form `V (V - (S+ - X)/2)(V - (S+ - X)) / (S2 (mu2 - mu1 sigma2/sigma1))`.
///
/// Agrees with [`compute_delta2`] when `r = 0`.
pub fn delta2_zero_rate_form(
    v: f64,
    s2: f64,
    s_plus: f64,
    strike: f64,
    params: &MarketParams,
) -> Result<f64> {
    ensure(s2 > 0.0 && s2.is_finite(), || format!("S2 must be positive, got {s2}"))?;
    let denom = params.mu2 - params.mu1 * params.sigma2 / params.sigma1;
    if denom == 0.0 {
        return Err(Error::SharpeGapZero);
    }
    let top = s_plus - strike;
    Ok(v * (v - 0.5 * top) * (v - top) / (s2 * denom))
}

/// `delta1 = V_S1 + (sigma2 S2 / (sigma1 S1)) V_S2 - delta2 sigma2 S2 / (sigma1 S1)`.
pub fn compute_delta1(
    v_s1: f64,
    v_s2: f64,
    s1: f64,
    s2: f64,
    delta2: f64,
    params: &MarketParams,
) -> Result<f64> {
    ensure(s1 > 0.0 && s1.is_finite(), || format!("S1 must be positive, got {s1}"))?;
    let k = params.sigma2 * s2 / (params.sigma1 * s1);
    Ok(v_s1 + k * v_s2 - delta2 * k)
}

/// Coefficient of `dW` in `dPi`.
pub fn diffusion_residual(
    v_s1: f64,
    v_s2: f64,
    s1: f64,
    s2: f64,
    delta1: f64,
    delta2: f64,
    params: &MarketParams,
) -> f64 {
    let (a, b) = (params.sigma1 * s1, params.sigma2 * s2);
    a * v_s1 + b * v_s2 - delta1 * a - delta2 * b
}

/// Largest magnitude among the terms of [`diffusion_residual`], floored at 1.
pub fn residual_scale(
    v_s1: f64,
    v_s2: f64,
    s1: f64,
    s2: f64,
    delta1: f64,
    delta2: f64,
    params: &MarketParams,
) -> f64 {
    let (a, b) = (params.sigma1 * s1, params.sigma2 * s2);
    [a * v_s1, b * v_s2, delta1 * a, delta2 * b].iter().fold(1.0f64, |m, x| m.max(x.abs()))
}

/// Value and nodal slope tables of a surface, for repeated lookups.
#[derive(Debug, Clone)]
pub struct SurfaceSampler<'a> {
    surface: &'a SolutionSurface,
    slopes: Vec<Vec<f64>>,
}

impl<'a> SurfaceSampler<'a> {
    pub fn new(surface: &'a SolutionSurface) -> Self {
        let slopes = surface.values.iter().map(|level| surface.grid.gradient(level)).collect();
        Self { surface, slopes }
    }

    /// `(U, U_y)` at `(y, tau)`, bilinear in both.
    pub fn grid_sample(&self, y: f64, tau: f64) -> (f64, f64) {
        let s = self.surface;
        let taus = &s.taus;
        let last = taus.len() - 1;
        let (k, w) = if last == 0 || tau <= taus[0] {
            (0, 0.0)
        } else if tau >= taus[last] {
            (last, 0.0)
        } else {
            let k = taus.partition_point(|t| *t <= tau) - 1;
            (k, (tau - taus[k]) / (taus[k + 1] - taus[k]))
        };
        let at = |level: usize| {
            (s.grid.interpolate(&s.values[level], y), s.grid.interpolate(&self.slopes[level], y))
        };
        let (u0, g0) = at(k);
        if w == 0.0 {
            return (u0, g0);
        }
        let (u1, g1) = at(k + 1);
        ((1.0 - w) * u0 + w * u1, (1.0 - w) * g0 + w * g1)
    }

    /// `(V, V_S1)` at price `s1` and calendar time `t`.
    pub fn sample(
        &self,
        s1: f64,
        t: f64,
        params: &MarketParams,
        dc: &DerivedConstants,
        contract: &ContractSpec,
    ) -> Result<(f64, f64)> {
        let (y, tau) = to_computational(s1, t, dc, contract)?;
        check_in_corridor(s1, tau, dc, contract)?;
        let (u, u_y) = self.grid_sample(y, tau);
        let v = price_from_grid_value(u, tau, params.r);
        let v_s1 = price_from_grid_value(u_y, tau, params.r) * contract.alpha1 / s1;
        Ok((v, v_s1))
    }
}

/// `(V, V_S1)` from a solved surface; see [`SurfaceSampler`] for repeated use.
pub fn surface_gradient(
    surface: &SolutionSurface,
    s1: f64,
    t: f64,
    params: &MarketParams,
    dc: &DerivedConstants,
    contract: &ContractSpec,
) -> Result<(f64, f64)> {
    SurfaceSampler::new(surface).sample(s1, t, params, dc, contract)
}

/// Which hedge to run along the paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HedgeStrategy {
    /// `delta2` from the cubic; the surface should solve the contrast problem.
    #[default]
    Arbitrage,
    /// `delta2 = 0`; the surface should solve the classical problem.
    Classical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HedgeSimConfig {
    pub strategy: HedgeStrategy,
    /// Volatility of the Black-Scholes premium reported next to the surface value.
    pub bs_sigma: f64,
    pub record_ledger: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LedgerRow {
    pub path: usize,
    pub time: f64,
    pub s1: f64,
    pub s2: f64,
    pub v: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub pi: f64,
    pub tracking_increment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathOutcome {
    /// `sum (dPi - r Pi dt)` over the completed steps.
    pub tracking_error: f64,
    pub steps_completed: usize,
    pub exited_corridor: bool,
    pub exit_time: Option<f64>,
    pub terminal_s1: f64,
    /// Call payoff at maturity; `None` when the path left the corridor.
    pub payoff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HedgeSimResult {
    pub strategy: HedgeStrategy,
    pub n_paths: usize,
    pub n_steps: usize,
    pub s1_0: f64,
    pub initial_value: f64,
    pub bs_sigma: f64,
    pub bs_premium: f64,
    /// `bs_premium - initial_value`.
    pub premium_gap: f64,
    pub mean_tracking_error: f64,
    pub mean_abs_tracking_error: f64,
    pub max_abs_tracking_error: f64,
    pub n_exited: usize,
    pub mean_payoff: f64,
    /// Mean payoff over paths ending above the strike; `0` when there are none.
    pub mean_payoff_in_the_money: f64,
    pub fraction_in_the_money: f64,
    pub paths: Vec<PathOutcome>,
    #[serde(skip)]
    pub ledger: Vec<LedgerRow>,
}

impl HedgeSimResult {
    /// CSV with columns `path,time,S1,S2,V,delta1,delta2,pi,tracking_increment`.
    pub fn write_ledger_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "path,time,S1,S2,V,delta1,delta2,pi,tracking_increment")?;
        for r in &self.ledger {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.path, r.time, r.s1, r.s2, r.v, r.delta1, r.delta2, r.pi, r.tracking_increment
            )?;
        }
        Ok(())
    }
}

/// Position held at one rebalance date.
#[allow(clippy::too_many_arguments)]
pub fn hedge_position(
    v: f64,
    v_s1: f64,
    s1: f64,
    s2: f64,
    tau: f64,
    strategy: HedgeStrategy,
    params: &MarketParams,
    dc: &DerivedConstants,
) -> Result<HedgePosition> {
    let delta2 = match strategy {
        HedgeStrategy::Arbitrage => compute_delta2(v, s2, tau, params, dc)?,
        HedgeStrategy::Classical => 0.0,
    };
    let delta1 = compute_delta1(v_s1, 0.0, s1, s2, delta2, params)?;
    Ok(HedgePosition { delta1, delta2, portfolio_value: v - delta1 * s1 - delta2 * s2 })
}

struct PathRun {
    outcome: PathOutcome,
    ledger: Vec<LedgerRow>,
}

#[allow(clippy::too_many_arguments)]
fn run_path(
    p: usize,
    ensemble: &PathEnsemble,
    sampler: &SurfaceSampler,
    params: &MarketParams,
    dc: &DerivedConstants,
    contract: &ContractSpec,
    cfg: &HedgeSimConfig,
) -> Result<PathRun> {
    let times = &ensemble.times;
    let (s1, s2) = (&ensemble.s1[p], &ensemble.s2[p]);
    let position_at = |k: usize| -> Result<(f64, HedgePosition)> {
        let (v, v_s1) = sampler.sample(s1[k], times[k], params, dc, contract)?;
        let tau = contract.maturity - times[k];
        Ok((v, hedge_position(v, v_s1, s1[k], s2[k], tau, cfg.strategy, params, dc)?))
    };

    let mut ledger = Vec::new();
    let (mut v, mut pos) = position_at(0)?;
    if cfg.record_ledger {
        ledger.push(LedgerRow {
            path: p,
            time: times[0],
            s1: s1[0],
            s2: s2[0],
            v,
            delta1: pos.delta1,
            delta2: pos.delta2,
            pi: pos.portfolio_value,
            tracking_increment: 0.0,
        });
    }
    let mut tracking = NeumaierSum::new();
    let mut exit_time = None;
    let mut steps = 0;
    for k in 0..ensemble.n_steps() {
        let (v_next, pos_next) = match position_at(k + 1) {
            Ok(x) => x,
            Err(Error::OutOfCorridor { .. }) => {
                exit_time = Some(times[k + 1]);
                break;
            }
            Err(e) => return Err(e),
        };
        let dt = times[k + 1] - times[k];
        let d_pi = (v_next - v) - pos.delta1 * (s1[k + 1] - s1[k]) - pos.delta2 * (s2[k + 1] - s2[k]);
        let inc = d_pi - params.r * pos.portfolio_value * dt;
        tracking.add(inc);
        steps += 1;
        v = v_next;
        pos = pos_next;
        if cfg.record_ledger {
            ledger.push(LedgerRow {
                path: p,
                time: times[k + 1],
                s1: s1[k + 1],
                s2: s2[k + 1],
                v,
                delta1: pos.delta1,
                delta2: pos.delta2,
                pi: pos.portfolio_value,
                tracking_increment: inc,
            });
        }
    }
    let terminal_s1 = s1[steps];
    let payoff = exit_time.is_none().then(|| (terminal_s1 - contract.strike).max(0.0));
    Ok(PathRun {
        outcome: PathOutcome {
            tracking_error: tracking.total(),
            steps_completed: steps,
            exited_corridor: exit_time.is_some(),
            exit_time,
            terminal_s1,
            payoff,
        },
        ledger,
    })
}

/// Replay the hedge along every path, rebalancing at the ensemble's times.
///
/// Paths that leave the corridor are truncated at the first date outside it
/// and flagged. The starting point must be inside the corridor.
pub fn simulate_hedged_portfolio(
    ensemble: &PathEnsemble,
    surface: &SolutionSurface,
    params: &MarketParams,
    dc: &DerivedConstants,
    contract: &ContractSpec,
    cfg: &HedgeSimConfig,
) -> Result<HedgeSimResult> {
    if cfg.strategy == HedgeStrategy::Arbitrage {
        require_sharpe_gap(params)?;
    }
    ensure(ensemble.n_paths() >= 1, || "ensemble has no paths".into())?;
    ensure(ensemble.horizon() <= contract.maturity * (1.0 + 1e-12), || {
        format!("ensemble horizon {} exceeds maturity {}", ensemble.horizon(), contract.maturity)
    })?;
    ensure(cfg.bs_sigma >= 0.0 && cfg.bs_sigma.is_finite(), || "bs_sigma must be non-negative".into())?;

    let sampler = SurfaceSampler::new(surface);
    let runs: Vec<PathRun> = (0..ensemble.n_paths())
        .into_par_iter()
        .map(|p| run_path(p, ensemble, &sampler, params, dc, contract, cfg))
        .collect::<Result<_>>()?;

    let s1_0 = ensemble.s1[0][0];
    let (initial_value, _) = sampler.sample(s1_0, ensemble.times[0], params, dc, contract)?;
    let ctx = QuoteContext::new(s1_0, params.r, contract.maturity - ensemble.times[0])?;
    let call = VanillaCall::new(contract.strike, contract.maturity)?;
    let bs_premium = bs_price(&ctx, &call, cfg.bs_sigma)?;

    let n = runs.len() as f64;
    let mean_tracking_error: f64 = runs.iter().map(|r| r.outcome.tracking_error).collect::<NeumaierSum>().total() / n;
    let mean_abs_tracking_error: f64 =
        runs.iter().map(|r| r.outcome.tracking_error.abs()).collect::<NeumaierSum>().total() / n;
    let max_abs_tracking_error = runs.iter().map(|r| r.outcome.tracking_error.abs()).fold(0.0, f64::max);
    let payoffs: Vec<f64> = runs.iter().filter_map(|r| r.outcome.payoff).collect();
    let itm: Vec<f64> = runs
        .iter()
        .filter(|r| r.outcome.payoff.is_some() && r.outcome.terminal_s1 > contract.strike)
        .filter_map(|r| r.outcome.payoff)
        .collect();
    let mean = |xs: &[f64]| {
        if xs.is_empty() {
            0.0
        } else {
            xs.iter().copied().collect::<NeumaierSum>().total() / xs.len() as f64
        }
    };

    let (paths, ledger): (Vec<_>, Vec<_>) = runs.into_iter().map(|r| (r.outcome, r.ledger)).unzip();
    Ok(HedgeSimResult {
        strategy: cfg.strategy,
        n_paths: paths.len(),
        n_steps: ensemble.n_steps(),
        s1_0,
        initial_value,
        bs_sigma: cfg.bs_sigma,
        bs_premium,
        premium_gap: bs_premium - initial_value,
        mean_tracking_error,
        mean_abs_tracking_error,
        max_abs_tracking_error,
        n_exited: paths.iter().filter(|p| p.exited_corridor).count(),
        mean_payoff: mean(&payoffs),
        mean_payoff_in_the_money: mean(&itm),
        fraction_in_the_money: if payoffs.is_empty() { 0.0 } else { itm.len() as f64 / payoffs.len() as f64 },
        paths,
        ledger: ledger.into_iter().flatten().collect(),
    })
}
