//! Closed-form Black-Scholes call pricing and implied volatility.
//!
//! The normal CDF is `0.5 * erfc(-x / sqrt 2)` with `statrs`'s erfc, which
//! follows the Boost rational approximations (relative error near 1e-16).

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{ensure, Error, Result};

/// European call on the first asset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VanillaCall {
    pub strike: f64,
    pub maturity: f64,
}

impl VanillaCall {
    pub fn new(strike: f64, maturity: f64) -> Result<Self> {
        ensure(strike > 0.0 && strike.is_finite(), || format!("strike must be positive, got {strike}"))?;
        ensure(maturity > 0.0 && maturity.is_finite(), || {
            format!("maturity must be positive, got {maturity}")
        })?;
        Ok(Self { strike, maturity })
    }

    pub fn payoff(&self, spot: f64) -> f64 {
        (spot - self.strike).max(0.0)
    }
}

/// Where and when the call is quoted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuoteContext {
    pub spot: f64,
    pub rate: f64,
    pub time_to_expiry: f64,
}

impl QuoteContext {
    pub fn new(spot: f64, rate: f64, time_to_expiry: f64) -> Result<Self> {
        let ctx = Self { spot, rate, time_to_expiry };
        ctx.validate()?;
        Ok(ctx)
    }

    fn validate(&self) -> Result<()> {
        ensure(self.spot > 0.0 && self.spot.is_finite(), || {
            format!("spot must be positive, got {}", self.spot)
        })?;
        ensure(self.rate.is_finite(), || "rate must be finite".into())?;
        ensure(self.time_to_expiry >= 0.0 && self.time_to_expiry.is_finite(), || {
            format!("time to expiry must be non-negative, got {}", self.time_to_expiry)
        })
    }

    fn discounted_strike(&self, call: &VanillaCall) -> f64 {
        call.strike * (-self.rate * self.time_to_expiry).exp()
    }

    /// No-arbitrage bounds `[(S - X e^{-r tau})^+, S]` for the call value.
    pub fn call_bounds(&self, call: &VanillaCall) -> (f64, f64) {
        ((self.spot - self.discounted_strike(call)).max(0.0), self.spot)
    }
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn norm_pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

fn check_sigma(sigma: f64) -> Result<()> {
    ensure(sigma >= 0.0 && sigma.is_finite(), || format!("sigma must be non-negative, got {sigma}"))
}

/// `(d1, d2)`, or `None` when the formula degenerates to the payoff.
fn d1_d2(ctx: &QuoteContext, call: &VanillaCall, sigma: f64) -> Option<(f64, f64)> {
    let tau = ctx.time_to_expiry;
    if tau == 0.0 || sigma == 0.0 {
        return None;
    }
    let vol = sigma * tau.sqrt();
    let d1 = ((ctx.spot / call.strike).ln() + (ctx.rate + 0.5 * sigma * sigma) * tau) / vol;
    Some((d1, d1 - vol))
}

pub fn bs_price(ctx: &QuoteContext, call: &VanillaCall, sigma: f64) -> Result<f64> {
    ctx.validate()?;
    check_sigma(sigma)?;
    Ok(match d1_d2(ctx, call, sigma) {
        Some((d1, d2)) => {
            let v = ctx.spot * norm_cdf(d1) - ctx.discounted_strike(call) * norm_cdf(d2);
            let (lo, hi) = ctx.call_bounds(call);
            v.clamp(lo, hi)
        }
        // tau = 0 is the payoff; sigma = 0 is the discounted forward payoff.
        None => (ctx.spot - ctx.discounted_strike(call)).max(0.0),
    })
}

pub fn bs_delta(ctx: &QuoteContext, call: &VanillaCall, sigma: f64) -> Result<f64> {
    ctx.validate()?;
    check_sigma(sigma)?;
    Ok(match d1_d2(ctx, call, sigma) {
        Some((d1, _)) => norm_cdf(d1),
        None => {
            if ctx.spot > ctx.discounted_strike(call) {
                1.0
            } else {
                0.0
            }
        }
    })
}

/// Sensitivity of the call price to sigma.
pub fn bs_vega(ctx: &QuoteContext, call: &VanillaCall, sigma: f64) -> Result<f64> {
    ctx.validate()?;
    check_sigma(sigma)?;
    Ok(match d1_d2(ctx, call, sigma) {
        Some((d1, _)) => ctx.spot * norm_pdf(d1) * ctx.time_to_expiry.sqrt(),
        None => 0.0,
    })
}

/// Bracket and stopping rules for [`bs_implied_vol_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpliedVolConfig {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub max_iterations: usize,
    /// Price tolerance, scaled by `max(1, price)`.
    pub price_tol: f64,
}

impl Default for ImpliedVolConfig {
    fn default() -> Self {
        Self { sigma_min: 1e-6, sigma_max: 10.0, max_iterations: 200, price_tol: 1e-10 }
    }
}

pub fn bs_implied_vol(ctx: &QuoteContext, call: &VanillaCall, observed: f64) -> Result<f64> {
    bs_implied_vol_with(ctx, call, observed, &ImpliedVolConfig::default())
}

/// Invert [`bs_price`] in sigma by Newton's method safeguarded with bisection.
///
/// Prices on or outside the no-arbitrage bounds, or outside the prices
/// reachable inside `[sigma_min, sigma_max]`, give [`Error::NoSolution`].
pub fn bs_implied_vol_with(
    ctx: &QuoteContext,
    call: &VanillaCall,
    observed: f64,
    cfg: &ImpliedVolConfig,
) -> Result<f64> {
    ctx.validate()?;
    ensure(ctx.time_to_expiry > 0.0, || "implied volatility needs time to expiry > 0".into())?;
    ensure(observed.is_finite(), || "observed price must be finite".into())?;

    let (lower, upper) = ctx.call_bounds(call);
    if observed <= lower || observed >= upper {
        return Err(Error::NoSolution(format!(
            "price {observed} outside the open interval ({lower}, {upper})"
        )));
    }

    let tol = cfg.price_tol * observed.max(1.0);
    let price = |s: f64| bs_price(ctx, call, s);
    let (mut lo, mut hi) = (cfg.sigma_min, cfg.sigma_max);
    let p_lo = price(lo)?;
    let p_hi = price(hi)?;
    if observed < p_lo - tol || observed > p_hi + tol {
        return Err(Error::NoSolution(format!(
            "price {observed} outside [{p_lo}, {p_hi}] reachable for sigma in [{lo}, {hi}]"
        )));
    }

    let mut sigma = initial_guess(ctx, call, observed).clamp(lo, hi);
    let mut residual = f64::INFINITY;
    for _ in 0..cfg.max_iterations {
        let p = price(sigma)?;
        residual = p - observed;
        if residual == 0.0 {
            return Ok(sigma);
        }
        if residual > 0.0 {
            hi = sigma;
        } else {
            lo = sigma;
        }
        let vega = bs_vega(ctx, call, sigma)?;
        // Newton on ln(price), which stays well scaled for deep out-of-the-money quotes.
        let step = if p > 0.0 && vega > 0.0 { (p.ln() - observed.ln()) * p / vega } else { f64::NAN };
        if residual.abs() <= tol {
            if step.is_finite() && step.abs() <= 1e-13 * sigma.max(1.0) {
                let polished = sigma - step;
                return Ok(if polished > lo && polished < hi { polished } else { sigma });
            }
            if hi - lo <= 4.0 * f64::EPSILON * hi {
                return Ok(sigma);
            }
        }
        let newton = sigma - step;
        sigma = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(Error::IterLimit { iterations: cfg.max_iterations, residual })
}

/// Manaster-Koehler point where vega is largest, blended with a
/// Brenner-Subrahmanyam at-the-money estimate.
fn initial_guess(ctx: &QuoteContext, call: &VanillaCall, observed: f64) -> f64 {
    let tau = ctx.time_to_expiry;
    let forward_moneyness = (ctx.spot / call.strike).ln() + ctx.rate * tau;
    let mk = (2.0 * forward_moneyness.abs() / tau).sqrt();
    let bs = (2.0 * std::f64::consts::PI / tau).sqrt() * observed / ctx.spot;
    if mk > 0.0 {
        mk.max(bs.min(mk * 4.0))
    } else {
        bs
    }
}
