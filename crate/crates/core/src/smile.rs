//! Option price and implied volatility against strike.
//!
//! Every strike gets its own solve, since `A = (e^{K+/alpha1} - X) / 2`
//! depends on the strike. Prices the Black-Scholes formula cannot reach are
//! kept and flagged instead of dropped.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::black_scholes::{bs_implied_vol, bs_price, QuoteContext, VanillaCall};
use crate::error::{ensure, Error, Result};
use crate::market::MarketParams;
use crate::pde::{solve_classical_bs, solve_contrast_problem, Grid1D, SolverConfig};
use crate::transform::{
    check_in_corridor, derive_constants, price_from_grid_value, to_computational, ContractSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReactionMode {
    /// The cubic of the arbitrage strategy.
    #[default]
    Cubic,
    /// `f = 0`; reproduces the classical price as a control.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VolStatus {
    Ok,
    NoSolution,
    IterLimit,
    /// The solve for this strike failed; no price is available.
    PriceFailed,
}

impl VolStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            VolStatus::Ok => "OK",
            VolStatus::NoSolution => "NO_SOLUTION",
            VolStatus::IterLimit => "ITER_LIMIT",
            VolStatus::PriceFailed => "PRICE_FAILED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmilePoint {
    pub strike: f64,
    pub price_classical: f64,
    pub price_arbitrage: Option<f64>,
    pub implied_vol: Option<f64>,
    pub vol_status: VolStatus,
    /// `0 <= price_arbitrage <= spot`.
    pub price_in_bounds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmileCurve {
    pub maturity: f64,
    pub spot: f64,
    pub points: Vec<SmilePoint>,
    /// Least-squares slope of implied vol against strike inside the window.
    pub skew: Option<f64>,
    pub skew_window: (f64, f64),
}

impl SmileCurve {
    pub fn n_ok(&self) -> usize {
        self.points.iter().filter(|p| p.vol_status == VolStatus::Ok).count()
    }

    /// CSV with columns `strike,price_classical,price_arbitrage,implied_vol,vol_status`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "strike,price_classical,price_arbitrage,implied_vol,vol_status")?;
        for p in &self.points {
            let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{}",
                p.strike,
                p.price_classical,
                opt(p.price_arbitrage),
                opt(p.implied_vol),
                p.vol_status.as_str()
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmileSettings {
    pub spot: f64,
    /// Volatility of the classical comparison price.
    pub sigma_ref: f64,
    pub n_intervals: usize,
    pub solver: SolverConfig,
    pub reaction: ReactionMode,
    /// Skew fit window as fractions of the spot.
    pub skew_window: (f64, f64),
}

fn check_strikes(strikes: &[f64]) -> Result<()> {
    ensure(!strikes.is_empty(), || "no strikes given".into())?;
    ensure(strikes.iter().all(|x| *x > 0.0 && x.is_finite()), || "strikes must be positive".into())?;
    ensure(strikes.windows(2).all(|w| w[0] < w[1]), || "strikes must be strictly increasing".into())
}

fn arbitrage_price(
    params: &MarketParams,
    contract: &ContractSpec,
    settings: &SmileSettings,
) -> Result<f64> {
    let dc = derive_constants(params, contract)?;
    let grid = Grid1D::corridor(contract, settings.n_intervals)?;
    let surface = match settings.reaction {
        ReactionMode::Cubic => solve_contrast_problem(params, contract, &grid, &settings.solver)?,
        ReactionMode::None => solve_classical_bs(params, contract, &grid, &settings.solver)?,
    };
    let (y, tau) = to_computational(settings.spot, 0.0, &dc, contract)?;
    let u = grid.interpolate(surface.final_profile(), y);
    Ok(price_from_grid_value(u, tau, params.r))
}

/// Classical and arbitrage prices at `t = 0` for each strike; implied vols left empty.
///
/// A failed solve marks its point `PRICE_FAILED` and the sweep continues.
pub fn price_curve(
    strikes: &[f64],
    params: &MarketParams,
    template: &ContractSpec,
    settings: &SmileSettings,
) -> Result<Vec<SmilePoint>> {
    check_strikes(strikes)?;
    let contracts: Vec<ContractSpec> =
        strikes.iter().map(|x| template.with_strike(*x)).collect::<Result<_>>()?;
    let dc = derive_constants(params, &contracts[0])?;
    check_in_corridor(settings.spot, template.maturity, &dc, template)?;
    let ctx = QuoteContext::new(settings.spot, params.r, template.maturity)?;

    contracts
        .par_iter()
        .map(|contract| {
            let call = VanillaCall::new(contract.strike, contract.maturity)?;
            let price_classical = bs_price(&ctx, &call, settings.sigma_ref)?;
            let price_arbitrage = match arbitrage_price(params, contract, settings) {
                Ok(v) => Some(v),
                Err(e) if e.is_numerical() => {
                    log::warn!("strike {}: {e}", contract.strike);
                    None
                }
                Err(e) => return Err(e),
            };
            let price_in_bounds =
                price_arbitrage.is_some_and(|v| (0.0..=settings.spot).contains(&v));
            if let Some(v) = price_arbitrage.filter(|_| !price_in_bounds) {
                log::warn!("strike {}: price {v} outside [0, spot]", contract.strike);
            }
            Ok(SmilePoint {
                strike: contract.strike,
                price_classical,
                price_arbitrage,
                implied_vol: None,
                vol_status: if price_arbitrage.is_some() { VolStatus::NoSolution } else { VolStatus::PriceFailed },
                price_in_bounds,
            })
        })
        .collect()
}

/// Least-squares slope of `ys` against `xs`; `None` with fewer than two distinct points.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Invert every price for its implied vol and fit the skew.
pub fn implied_curve(
    mut points: Vec<SmilePoint>,
    spot: f64,
    rate: f64,
    maturity: f64,
    skew_window: (f64, f64),
) -> Result<SmileCurve> {
    ensure(maturity > 0.0, || format!("maturity must be positive, got {maturity}"))?;
    ensure(skew_window.0 < skew_window.1, || "skew window is empty".into())?;
    let ctx = QuoteContext::new(spot, rate, maturity)?;
    for p in points.iter_mut() {
        let Some(price) = p.price_arbitrage else {
            p.vol_status = VolStatus::PriceFailed;
            p.implied_vol = None;
            continue;
        };
        let call = VanillaCall::new(p.strike, maturity)?;
        (p.implied_vol, p.vol_status) = match bs_implied_vol(&ctx, &call, price) {
            Ok(s) => (Some(s), VolStatus::Ok),
            Err(Error::NoSolution(_)) => (None, VolStatus::NoSolution),
            Err(Error::IterLimit { .. }) => (None, VolStatus::IterLimit),
            Err(e) => return Err(e),
        };
    }
    let (lo, hi) = (skew_window.0 * spot, skew_window.1 * spot);
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| (lo..=hi).contains(&p.strike))
        .filter_map(|p| p.implied_vol.map(|v| (p.strike, v)))
        .unzip();
    let curve = SmileCurve { maturity, spot, skew: fit_slope(&xs, &ys), skew_window, points };
    if curve.n_ok() == 0 {
        return Err(Error::EmptyCurve);
    }
    Ok(curve)
}

/// One curve per maturity.
pub fn smile_surface(
    strikes: &[f64],
    maturities: &[f64],
    params: &MarketParams,
    template: &ContractSpec,
    settings: &SmileSettings,
) -> Result<Vec<SmileCurve>> {
    ensure(!maturities.is_empty(), || "no maturities given".into())?;
    maturities
        .iter()
        .map(|t| {
            let contract = template.with_maturity(*t)?;
            let points = price_curve(strikes, params, &contract, settings)?;
            implied_curve(points, settings.spot, params.r, *t, settings.skew_window)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference(sigma1: f64) -> (MarketParams, ContractSpec) {
        (
            MarketParams::new(0.10, 0.03, sigma1, 0.01, 0.0).unwrap(),
            ContractSpec::from_corridor(20.0, 0.25, 0.1, 100.0, 1.0, 1.0).unwrap(),
        )
    }

    fn settings(spot: f64, sigma_ref: f64, n: usize, dt: f64, reaction: ReactionMode) -> SmileSettings {
        SmileSettings {
            spot,
            sigma_ref,
            n_intervals: n,
            solver: SolverConfig::new(dt),
            reaction,
            skew_window: (0.8, 1.2),
        }
    }

    fn bs_points(strikes: &[f64], spot: f64, tau: f64, sigma: f64) -> Vec<SmilePoint> {
        let ctx = QuoteContext::new(spot, 0.01, tau).unwrap();
        strikes
            .iter()
            .map(|x| {
                let p = bs_price(&ctx, &VanillaCall::new(*x, tau).unwrap(), sigma).unwrap();
                SmilePoint {
                    strike: *x,
                    price_classical: p,
                    price_arbitrage: Some(p),
                    implied_vol: None,
                    vol_status: VolStatus::NoSolution,
                    price_in_bounds: true,
                }
            })
            .collect()
    }

    #[test]
    fn round_trip_is_flat() {
        let strikes: Vec<f64> = (16..=24).map(f64::from).collect();
        let c = implied_curve(bs_points(&strikes, 20.0, 0.5, 0.3), 20.0, 0.01, 0.5, (0.8, 1.2)).unwrap();
        assert_eq!(c.n_ok(), strikes.len());
        for p in &c.points {
            assert!((p.implied_vol.unwrap() - 0.3).abs() < 1e-8);
        }
        assert!(c.skew.unwrap().abs() < 1e-8);
    }

    #[test]
    fn sub_bound_price_is_flagged() {
        let strikes = [18.0, 20.0, 22.0];
        let mut pts = bs_points(&strikes, 20.0, 0.5, 0.3);
        pts[0].price_arbitrage = Some(0.5);
        let c = implied_curve(pts, 20.0, 0.01, 0.5, (0.8, 1.2)).unwrap();
        assert_eq!(c.points[0].vol_status, VolStatus::NoSolution);
        assert_eq!(c.points[0].implied_vol, None);
        assert_eq!(c.n_ok(), 2);
    }

    #[test]
    fn empty_curve_is_an_error() {
        let mut pts = bs_points(&[18.0, 20.0], 20.0, 0.5, 0.3);
        for p in &mut pts {
            p.price_arbitrage = Some(0.0);
        }
        assert_eq!(implied_curve(pts, 20.0, 0.01, 0.5, (0.8, 1.2)).unwrap_err(), Error::EmptyCurve);
    }

    #[test]
    fn fit_slope_examples() {
        assert_eq!(fit_slope(&[1.0, 2.0, 3.0], &[1.0, 3.0, 5.0]), Some(2.0));
        assert_eq!(fit_slope(&[1.0], &[1.0]), None);
        assert_eq!(fit_slope(&[2.0, 2.0], &[1.0, 3.0]), None);
    }

    #[test]
    fn arbitrage_price_is_negligible_below_the_step() {
        let (params, contract) = reference(0.02);
        let s = settings(20.0, 0.02, 100, 2e-4, ReactionMode::Cubic);
        let pts = price_curve(&[20.0], &params, &contract, &s).unwrap();
        assert!(pts[0].price_arbitrage.unwrap() < 0.05 * 40.0);
        assert!(pts[0].price_classical > 0.0);
        assert!(pts[0].price_in_bounds);
    }

    #[test]
    fn strike_near_the_top_collapses_the_price() {
        let (params, contract) = reference(0.02);
        let s = settings(60.0, 0.02, 100, 2e-4, ReactionMode::Cubic);
        let pts = price_curve(&[99.9], &params, &contract, &s).unwrap();
        assert!(pts[0].price_arbitrage.unwrap() <= 0.1 + 1e-12);
    }

    #[test]
    fn control_run_matches_classical() {
        let (params, contract) = reference(0.2);
        let s = settings(20.0, 0.2, 800, 2e-4, ReactionMode::None);
        let strikes = [16.0, 18.0, 20.0, 22.0, 24.0];
        for p in price_curve(&strikes, &params, &contract, &s).unwrap() {
            let v = p.price_arbitrage.unwrap();
            let rel = (v - p.price_classical).abs() / p.price_classical;
            assert!(rel < 1e-2, "strike {}: {v} vs {}", p.strike, p.price_classical);
        }
    }

    #[test]
    fn rejects_bad_strikes_and_spot() {
        let (params, contract) = reference(0.02);
        let s = settings(20.0, 0.02, 20, 1e-2, ReactionMode::Cubic);
        assert!(price_curve(&[], &params, &contract, &s).is_err());
        assert!(price_curve(&[20.0, 19.0], &params, &contract, &s).is_err());
        assert!(price_curve(&[20.0, 120.0], &params, &contract, &s).is_err());
        let outside = settings(500.0, 0.02, 20, 1e-2, ReactionMode::Cubic);
        assert!(matches!(price_curve(&[20.0], &params, &contract, &outside), Err(Error::OutOfCorridor { .. })));
    }

    #[test]
    fn curve_csv_layout() {
        let c = implied_curve(bs_points(&[19.0, 21.0], 20.0, 0.5, 0.3), 20.0, 0.01, 0.5, (0.8, 1.2)).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "strike,price_classical,price_arbitrage,implied_vol,vol_status");
        assert!(lines[1].starts_with("19,") && lines[1].ends_with(",OK"));
    }
}
