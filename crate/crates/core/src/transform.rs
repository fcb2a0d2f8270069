//! Changes of variables between financial coordinates `(S1, S2, t, V)` and
//! computational coordinates `(y1, y2, tau, U)`:
//!
//! ```text
//! tau = T - t
//! y1  = alpha1 ln S1 + c1 tau
//! y2  = alpha2 (sigma1 ln S2 - sigma2 ln S1) + c2 tau
//! V   = e^{-r tau} U
//! ```
//!
//! The corridor `[S-(tau), S+(tau)]` maps onto the fixed interval `[K-, K+]`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::market::MarketParams;

/// Default threshold on `sigma1^2 T` above which freezing the right boundary
/// value is reported as questionable.
pub const DEFAULT_FROZEN_BOUNDARY_THRESHOLD: f64 = 0.01;

/// The contract and the free scale constants of the transformation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractSpec {
    pub strike: f64,
    pub maturity: f64,
    pub k_minus: f64,
    pub k_plus: f64,
    pub alpha1: f64,
    pub alpha2: f64,
}

impl ContractSpec {
    pub fn new(
        strike: f64,
        maturity: f64,
        k_minus: f64,
        k_plus: f64,
        alpha1: f64,
        alpha2: f64,
    ) -> Result<Self> {
        let c = Self { strike, maturity, k_minus, k_plus, alpha1, alpha2 };
        c.validate()?;
        Ok(c)
    }

    /// Build from corridor prices at expiry: `K+- = alpha1 ln S+-`.
    pub fn from_corridor(
        strike: f64,
        maturity: f64,
        s_minus: f64,
        s_plus: f64,
        alpha1: f64,
        alpha2: f64,
    ) -> Result<Self> {
        ensure(s_minus > 0.0 && s_plus > 0.0, || {
            format!("corridor prices must be positive, got [{s_minus}, {s_plus}]")
        })?;
        Self::new(strike, maturity, alpha1 * s_minus.ln(), alpha1 * s_plus.ln(), alpha1, alpha2)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.strike, self.maturity, self.k_minus, self.k_plus, self.alpha1, self.alpha2];
        ensure(all.iter().all(|x| x.is_finite()), || "contract fields must be finite".into())?;
        ensure(self.strike > 0.0, || format!("strike must be positive, got {}", self.strike))?;
        ensure(self.maturity > 0.0, || format!("maturity must be positive, got {}", self.maturity))?;
        ensure(self.k_minus < 0.0 && 0.0 < self.k_plus, || {
            format!("need K- < 0 < K+, got K- = {}, K+ = {}", self.k_minus, self.k_plus)
        })?;
        ensure(self.alpha1 > 0.0 && self.alpha2 > 0.0, || {
            format!("alpha1 and alpha2 must be positive, got {} and {}", self.alpha1, self.alpha2)
        })?;
        let top = (self.k_plus / self.alpha1).exp();
        ensure(top > self.strike, || {
            format!("upper corridor price e^(K+/alpha1) = {top} must exceed the strike {}", self.strike)
        })
    }

    pub fn with_strike(&self, strike: f64) -> Result<Self> {
        Self::new(strike, self.maturity, self.k_minus, self.k_plus, self.alpha1, self.alpha2)
    }

    pub fn with_maturity(&self, maturity: f64) -> Result<Self> {
        Self::new(self.strike, maturity, self.k_minus, self.k_plus, self.alpha1, self.alpha2)
    }
}

/// Constants fixed by the market and the contract.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub c1: f64,
    pub c2: f64,
    pub eps: f64,
    /// Step half-height `A = (e^{K+/alpha1} - X) / 2`.
    #[serde(rename = "A")]
    pub half_step: f64,
    /// Step height `B = 2A`.
    #[serde(rename = "B")]
    pub full_step: f64,
    /// Transition coordinate `(K- + K+) / 2`.
    pub x0: f64,
    pub s_minus: f64,
    pub s_plus: f64,
    /// Transition price `sqrt(S- S+)`.
    pub s0: f64,
    pub lambda: f64,
}

pub fn derive_constants(params: &MarketParams, contract: &ContractSpec) -> Result<DerivedConstants> {
    params.validate()?;
    contract.validate()?;
    let MarketParams { mu1, mu2, sigma1, sigma2, r } = *params;

    let c1 = contract.alpha1 * (r - 0.5 * sigma1 * sigma1);
    let c2 = contract.alpha2
        * (mu2 * sigma1 - mu1 * sigma2 + 0.5 * sigma1 * sigma2 * (sigma1 - sigma2));
    let eps = (0.5 * sigma1 * sigma1 * contract.alpha1 * contract.alpha1).sqrt();
    let s_minus = (contract.k_minus / contract.alpha1).exp();
    let s_plus = (contract.k_plus / contract.alpha1).exp();
    let half_step = 0.5 * (s_plus - contract.strike);

    if exceeds_frozen_boundary_threshold(params, contract, DEFAULT_FROZEN_BOUNDARY_THRESHOLD) {
        log::warn!(
            "sigma1^2 T = {:.4} >= {}; the time-frozen right boundary value is a coarse approximation",
            sigma1 * sigma1 * contract.maturity,
            DEFAULT_FROZEN_BOUNDARY_THRESHOLD
        );
    }

    Ok(DerivedConstants {
        c1,
        c2,
        eps,
        half_step,
        full_step: 2.0 * half_step,
        x0: 0.5 * (contract.k_minus + contract.k_plus),
        s_minus,
        s_plus,
        s0: (s_minus * s_plus).sqrt(),
        lambda: params.sharpe_gap(),
    })
}

pub fn exceeds_frozen_boundary_threshold(
    params: &MarketParams,
    contract: &ContractSpec,
    threshold: f64,
) -> bool {
    params.sigma1 * params.sigma1 * contract.maturity >= threshold
}

/// `(S1, t) -> (y1, tau)`.
pub fn to_computational(
    s1: f64,
    t: f64,
    dc: &DerivedConstants,
    contract: &ContractSpec,
) -> Result<(f64, f64)> {
    ensure(s1 > 0.0 && s1.is_finite(), || format!("S1 must be positive, got {s1}"))?;
    check_time(t, contract)?;
    let tau = contract.maturity - t;
    Ok((contract.alpha1 * s1.ln() + dc.c1 * tau, tau))
}

/// `(y1, tau) -> (S1, t)`, the inverse of [`to_computational`].
pub fn from_computational(
    y1: f64,
    tau: f64,
    dc: &DerivedConstants,
    contract: &ContractSpec,
) -> Result<(f64, f64)> {
    ensure(y1.is_finite(), || "y1 must be finite".into())?;
    check_time(tau, contract)?;
    Ok((((y1 - dc.c1 * tau) / contract.alpha1).exp(), contract.maturity - tau))
}

fn check_time(t: f64, contract: &ContractSpec) -> Result<()> {
    let slack = 1e-12 * contract.maturity;
    ensure((-slack..=contract.maturity + slack).contains(&t), || {
        format!("time {t} outside [0, {}]", contract.maturity)
    })
}

/// Moving corridor `(S-(tau), S+(tau)) = e^{K+-/alpha1 - c1 tau / alpha1}`.
pub fn corridor_prices(tau: f64, dc: &DerivedConstants, contract: &ContractSpec) -> (f64, f64) {
    let shift = dc.c1 * tau / contract.alpha1;
    (
        (contract.k_minus / contract.alpha1 - shift).exp(),
        (contract.k_plus / contract.alpha1 - shift).exp(),
    )
}

/// Invert the second coordinate for the price of asset 2.
pub fn s2_from_coords(
    y1: f64,
    y2: f64,
    tau: f64,
    dc: &DerivedConstants,
    params: &MarketParams,
    contract: &ContractSpec,
) -> f64 {
    let x1 = y1 - dc.c1 * tau;
    let x2 = y2 - dc.c2 * tau;
    (x2 / (contract.alpha2 * params.sigma1) + params.sigma2 * x1 / (contract.alpha1 * params.sigma1))
        .exp()
}

/// `y2 = alpha2 (sigma1 ln S2 - sigma2 ln S1) + c2 tau`.
pub fn y2_from_prices(
    s1: f64,
    s2: f64,
    tau: f64,
    dc: &DerivedConstants,
    params: &MarketParams,
    contract: &ContractSpec,
) -> f64 {
    contract.alpha2 * (params.sigma1 * s2.ln() - params.sigma2 * s1.ln()) + dc.c2 * tau
}

/// `V = e^{-r tau} U`.
pub fn price_from_grid_value(u: f64, tau: f64, r: f64) -> f64 {
    (-r * tau).exp() * u
}

pub fn grid_value_from_price(v: f64, tau: f64, r: f64) -> f64 {
    (r * tau).exp() * v
}

/// Call payoff in computational coordinates, `(e^{y1/alpha1} - X)^+`.
pub fn terminal_profile(y1: f64, contract: &ContractSpec) -> f64 {
    ((y1 / contract.alpha1).exp() - contract.strike).max(0.0)
}

/// Reaction term `f(u)` of the semi-linear problem together with `f'(u)`.
pub trait Nonlinearity: Sync {
    fn value(&self, u: f64) -> f64;
    fn derivative(&self, u: f64) -> f64;
}

/// `f(u) = u (u - A)(u - B)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicNonlinearity {
    pub a: f64,
    pub b: f64,
}

impl CubicNonlinearity {
    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }
}

impl Nonlinearity for CubicNonlinearity {
    fn value(&self, u: f64) -> f64 {
        u * (u - self.a) * (u - self.b)
    }

    fn derivative(&self, u: f64) -> f64 {
        3.0 * u * u - 2.0 * (self.a + self.b) * u + self.a * self.b
    }
}

/// `f = 0`: the linear heat equation, i.e. the classical hedge with `delta2 = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoReaction;

impl Nonlinearity for NoReaction {
    fn value(&self, _u: f64) -> f64 {
        0.0
    }

    fn derivative(&self, _u: f64) -> f64 {
        0.0
    }
}

/// A reaction term given by a pair of closures.
pub struct FnNonlinearity<F, G> {
    f: F,
    df: G,
}

impl<F, G> FnNonlinearity<F, G>
where
    F: Fn(f64) -> f64 + Sync,
    G: Fn(f64) -> f64 + Sync,
{
    pub fn new(f: F, df: G) -> Self {
        Self { f, df }
    }
}

impl<F, G> Nonlinearity for FnNonlinearity<F, G>
where
    F: Fn(f64) -> f64 + Sync,
    G: Fn(f64) -> f64 + Sync,
{
    fn value(&self, u: f64) -> f64 {
        (self.f)(u)
    }

    fn derivative(&self, u: f64) -> f64 {
        (self.df)(u)
    }
}

pub fn cubic_nonlinearity(dc: &DerivedConstants) -> CubicNonlinearity {
    CubicNonlinearity::new(dc.half_step, dc.full_step)
}

/// Time-frozen Dirichlet data `(U(K-), U(K+)) = (0, e^{K+/alpha1} - X)`.
pub fn boundary_values(dc: &DerivedConstants) -> (f64, f64) {
    (0.0, dc.full_step)
}

/// Check that `s1` lies in the corridor at time-to-expiry `tau`.
pub fn check_in_corridor(
    s1: f64,
    tau: f64,
    dc: &DerivedConstants,
    contract: &ContractSpec,
) -> Result<()> {
    let (lower, upper) = corridor_prices(tau, dc, contract);
    let slack = 1e-12;
    if s1 < lower * (1.0 - slack) || s1 > upper * (1.0 + slack) || !s1.is_finite() {
        return Err(Error::OutOfCorridor { s1, lower, upper });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Corridor and constants of the reference experiment: S- = 0.1, S+ = 100,
    /// alpha1 = 1, sigma1 = 0.02, X = 20, T = 0.25, r = 0.
    fn reference() -> (MarketParams, ContractSpec, DerivedConstants) {
        let params = MarketParams::new(0.10, 0.03, 0.02, 0.01, 0.0).unwrap();
        let contract = ContractSpec::from_corridor(20.0, 0.25, 0.1, 100.0, 1.0, 1.0).unwrap();
        let dc = derive_constants(&params, &contract).unwrap();
        (params, contract, dc)
    }

    #[test]
    fn reference_constants() {
        let (_, _, dc) = reference();
        assert!((dc.eps - 0.02 / 2f64.sqrt()).abs() < 1e-15);
        assert!((dc.eps - 0.0141421).abs() < 1e-7);
        assert!((dc.half_step - 40.0).abs() < 1e-12);
        assert_eq!(dc.full_step, 2.0 * dc.half_step);
        assert!((dc.s0 - 10f64.sqrt()).abs() < 1e-12);
        assert!((dc.x0 - 0.5 * (0.1f64.ln() + 100f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn c1_vanishes_when_rate_is_half_variance() {
        let params = MarketParams::new(0.1, 0.03, 0.2, 0.1, 0.02).unwrap();
        let contract = ContractSpec::from_corridor(20.0, 0.25, 0.1, 100.0, 1.0, 1.0).unwrap();
        assert!(derive_constants(&params, &contract).unwrap().c1.abs() < 1e-16);
    }

    #[test]
    fn rejects_strike_above_corridor() {
        assert!(ContractSpec::from_corridor(100.5, 0.25, 0.1, 100.0, 1.0, 1.0).is_err());
        assert!(ContractSpec::from_corridor(150.0, 0.25, 0.1, 100.0, 1.0, 1.0).is_err());
        assert!(ContractSpec::new(20.0, 0.25, 1.0, 4.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn to_computational_examples() {
        let (_, contract, dc) = reference();
        let (y, tau) = to_computational(1.0, contract.maturity, &dc, &contract).unwrap();
        assert_eq!((y, tau), (0.0, 0.0));
        assert!(to_computational(-1.0, 0.0, &dc, &contract).is_err());
        assert!(to_computational(1.0, 0.3, &dc, &contract).is_err());

        let flat = DerivedConstants { c1: 0.0, ..dc };
        for t in [0.0, 0.1, 0.25] {
            let (y, _) = to_computational(std::f64::consts::E, t, &flat, &contract).unwrap();
            assert!((y - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn corridor_examples() {
        let (_, contract, dc) = reference();
        let (lo, hi) = corridor_prices(0.0, &dc, &contract);
        assert!((lo - 0.1).abs() < 1e-14 && (hi - 100.0).abs() < 1e-11);

        let flat = DerivedConstants { c1: 0.0, ..dc };
        assert_eq!(corridor_prices(0.2, &flat, &contract), corridor_prices(0.0, &flat, &contract));
    }

    #[test]
    fn corridor_edges_map_to_fixed_interval() {
        let (_, contract, dc) = reference();
        for tau in [0.0, 0.1, 0.25] {
            let (lo, hi) = corridor_prices(tau, &dc, &contract);
            let t = contract.maturity - tau;
            let (ylo, _) = to_computational(lo, t, &dc, &contract).unwrap();
            let (yhi, _) = to_computational(hi, t, &dc, &contract).unwrap();
            assert!((ylo - contract.k_minus).abs() < 1e-12);
            assert!((yhi - contract.k_plus).abs() < 1e-12);
        }
    }

    #[test]
    fn s2_unit_at_shift_origin() {
        let (params, contract, dc) = reference();
        let tau = 0.13;
        let s2 = s2_from_coords(dc.c1 * tau, dc.c2 * tau, tau, &dc, &params, &contract);
        assert!((s2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn grid_value_examples() {
        assert_eq!(price_from_grid_value(0.0, 0.3, 0.05), 0.0);
        assert_eq!(price_from_grid_value(12.5, 0.0, 0.05), 12.5);
        let v = price_from_grid_value(80.0, 0.25, 0.05);
        assert!((v - 80.0 * (-0.0125f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn terminal_profile_examples() {
        let (_, contract, dc) = reference();
        assert!(terminal_profile(20f64.ln(), &contract).abs() < 1e-13);
        assert!((terminal_profile(contract.k_plus, &contract) - 2.0 * dc.half_step).abs() < 1e-12);
        assert_eq!(terminal_profile(contract.k_minus, &contract), 0.0);
    }

    #[test]
    fn cubic_examples() {
        let (_, _, dc) = reference();
        let f = cubic_nonlinearity(&dc);
        let a = dc.half_step;
        for root in [0.0, a, 2.0 * a] {
            assert_eq!(f.value(root), 0.0);
        }
        assert_eq!(f.derivative(0.0), 2.0 * a * a);
        assert!((f.value(a / 2.0) - 3.0 * a.powi(3) / 8.0).abs() < 1e-9);
        // derivative against a central difference
        for u in [-3.0, 7.5, 33.0, 61.0, 90.0] {
            let h = 1e-4;
            let fd = (f.value(u + h) - f.value(u - h)) / (2.0 * h);
            assert!((fd - f.derivative(u)).abs() < 1e-5 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn boundary_value_examples() {
        let (params, contract, dc) = reference();
        assert_eq!(boundary_values(&dc), (0.0, dc.full_step));
        assert!((boundary_values(&dc).1 - 80.0).abs() < 1e-12);
        let near = ContractSpec::from_corridor(99.999_999, 0.25, 0.1, 100.0, 1.0, 1.0).unwrap();
        let dn = derive_constants(&params, &near).unwrap();
        assert!(boundary_values(&dn).1 < 1e-5);
        let _ = contract;
    }

    #[test]
    fn frozen_boundary_threshold() {
        let (params, contract, _) = reference();
        assert!(!exceeds_frozen_boundary_threshold(&params, &contract, 0.01));
        let loud = MarketParams { sigma1: 0.5, ..params };
        assert!(exceeds_frozen_boundary_threshold(&loud, &contract, 0.01));
    }
}
