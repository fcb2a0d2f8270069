//! Contrast step-like structures for the cubic reaction term.
//!
//! For `eps^2 u_xx - u_t = f(u)` with `f(u) = u (u - A)(u - B)` the stable
//! roots are `0` and `B` and the unstable root is `A`. This module checks the
//! existence and attraction conditions (A1)-(A6) numerically, locates the
//! predicted transition point and measures how far a stationary profile is
//! from the piecewise-constant limit.
//!
//! Conditions are reported, never raised: every check yields a
//! [`ConditionCheck`] with a verdict and a human-readable detail.
//!
//! Two degenerate branches are accepted and reported distinctly:
//! - `J = 0` identically (the balanced cubic `B = 2A`). The zero set of `J` is
//!   the whole segment, which satisfies (A4), but `dJ/dx(x0) < 0` in (A2)
//!   cannot hold.
//! - A boundary datum equal to the stable root on its own side
//!   (`g_a = phi1`, `g_b = phi2`). The strict inequalities of (A3) fail, but
//!   no boundary layer is needed and the integral clauses are vacuous.
//!
//! (A6) is tested as: there is a node `x-` in `(a, x0)` such that `u0 < phi0`
//! on `[a, x-]`, and a node `x+` in `(x0, b)` such that `u0 > phi0` on
//! `[x+, b]`. When `J > 0` only `u0(x-) < phi0` is required on the left, and
//! when `J < 0` only `u0(x+) > phi0` on the right.

use serde::Serialize;

use crate::error::{ensure, Error, Result};
use crate::market::MarketParams;
use crate::pde::{march_to_stationary, payoff_nodes, Grid1D, SolverConfig};
use crate::quad::adaptive_simpson;
use crate::transform::{
    boundary_values, cubic_nonlinearity, derive_constants, ContractSpec, DerivedConstants,
    Nonlinearity,
};

/// Roots of the cubic: lower stable `phi1`, unstable `phi0`, upper stable `phi2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CubicRoots {
    pub phi1: f64,
    pub phi0: f64,
    pub phi2: f64,
}

impl CubicRoots {
    pub fn new(phi1: f64, phi0: f64, phi2: f64) -> Result<Self> {
        ensure(phi1 < phi0 && phi0 < phi2, || {
            format!("roots must satisfy phi1 < phi0 < phi2, got {phi1}, {phi0}, {phi2}")
        })?;
        Ok(Self { phi1, phi0, phi2 })
    }

    /// `(0, A, B)` for the problem's cubic.
    pub fn from_constants(dc: &DerivedConstants) -> Result<Self> {
        Self::new(0.0, dc.half_step, dc.full_step)
    }

    fn half_span(&self) -> f64 {
        0.5 * (self.phi2 - self.phi1)
    }

    fn tol(&self) -> f64 {
        1e-9 * (1.0 + self.phi1.abs().max(self.phi2.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    DegenerateAccepted,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub verdict: Verdict,
    pub detail: String,
}

impl ConditionCheck {
    fn pass(detail: impl Into<String>) -> Self {
        Self { verdict: Verdict::Pass, detail: detail.into() }
    }

    fn degenerate(detail: impl Into<String>) -> Self {
        Self { verdict: Verdict::DegenerateAccepted, detail: detail.into() }
    }

    fn fail(detail: impl Into<String>) -> Self {
        Self { verdict: Verdict::Fail, detail: detail.into() }
    }

    pub fn holds(&self) -> bool {
        self.verdict != Verdict::Fail
    }
}

/// Verdicts for (A1)-(A6).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionsReport {
    pub a1: ConditionCheck,
    pub a2: ConditionCheck,
    pub a3: ConditionCheck,
    pub a4: ConditionCheck,
    pub a5: ConditionCheck,
    pub a6: ConditionCheck,
    pub j_value: f64,
    pub j_identically_zero: bool,
    pub x0_predicted: f64,
    /// Where the initial data crosses the unstable root, if it does.
    pub initial_crossing: Option<f64>,
}

impl ConditionsReport {
    pub fn all_hold(&self) -> bool {
        [&self.a1, &self.a2, &self.a3, &self.a4, &self.a5, &self.a6]
            .iter()
            .all(|c| c.holds())
    }
}

/// `J = int_{phi1}^{phi2} f(u) du`; quadrature tolerance `1e-12 ((phi2 - phi1)/2)^4`.
pub fn compute_j<F: Nonlinearity + ?Sized>(f: &F, phi1: f64, phi2: f64) -> Result<f64> {
    ensure(phi1 < phi2, || format!("need phi1 < phi2, got {phi1}, {phi2}"))?;
    let half = 0.5 * (phi2 - phi1);
    let tol = (1e-12 * half.powi(4)).max(f64::MIN_POSITIVE);
    Ok(adaptive_simpson(|u| f.value(u), phi1, phi2, tol).value)
}

/// Transition point `a + (b - a) sqrt f'(phi2) / (sqrt f'(phi2) + sqrt f'(phi1))`.
pub fn transition_point<F: Nonlinearity + ?Sized>(
    f: &F,
    phi1: f64,
    phi2: f64,
    a: f64,
    b: f64,
) -> Result<f64> {
    ensure(a < b, || format!("empty interval [{a}, {b}]"))?;
    let d1 = f.derivative(phi1);
    let d2 = f.derivative(phi2);
    ensure(d1 > 0.0 && d2 > 0.0, || {
        format!("f' must be positive at the stable roots, got f'(phi1) = {d1}, f'(phi2) = {d2}")
    })?;
    let (r1, r2) = (d1.sqrt(), d2.sqrt());
    Ok(a + (b - a) * r2 / (r1 + r2))
}

/// Piecewise limit: `0` left of `x0`, `2A` right of it, `A` at `x0`.
pub fn limit_profile(x: f64, x0: f64, dc: &DerivedConstants) -> f64 {
    if x < x0 {
        0.0
    } else if x > x0 {
        dc.full_step
    } else {
        dc.half_step
    }
}

/// First upward crossing of `level` by the nodal profile, by linear interpolation.
pub fn level_crossing(grid: &Grid1D, profile: &[f64], level: f64) -> Option<f64> {
    profile.windows(2).enumerate().find_map(|(i, w)| {
        (w[0] < level && w[1] >= level)
            .then(|| grid.nodes[i] + (level - w[0]) / (w[1] - w[0]) * grid.h)
    })
}

fn sign_constant_on<F: Nonlinearity + ?Sized>(f: &F, lo: f64, hi: f64) -> Option<f64> {
    const SAMPLES: usize = 1000;
    let mut sign = 0.0;
    for k in 1..SAMPLES {
        let u = lo + (hi - lo) * k as f64 / SAMPLES as f64;
        let s = f.value(u).signum();
        if f.value(u) == 0.0 || (sign != 0.0 && s != sign) {
            return None;
        }
        sign = s;
    }
    Some(sign)
}

fn check_a1<F: Nonlinearity + ?Sized>(f: &F, roots: &CubicRoots) -> ConditionCheck {
    let CubicRoots { phi1, phi0, phi2 } = *roots;
    let (d1, d0, d2) = (f.derivative(phi1), f.derivative(phi0), f.derivative(phi2));
    let scale = roots.half_span().powi(3).max(1.0);
    let at_roots = [phi1, phi0, phi2].map(|r| f.value(r).abs());
    if at_roots.iter().any(|v| *v > 1e-9 * scale) {
        return ConditionCheck::fail(format!("f does not vanish at the roots: {at_roots:?}"));
    }
    if !(d1 > 0.0 && d2 > 0.0 && d0 < 0.0) {
        return ConditionCheck::fail(format!(
            "sign pattern violated: f'(phi1) = {d1}, f'(phi0) = {d0}, f'(phi2) = {d2}"
        ));
    }
    // Bounding curves taken as the constants phi1 - A and phi2 + A.
    let lower = phi1 - roots.half_span();
    let upper = phi2 + roots.half_span();
    let gaps = [(lower, phi1), (phi1, phi0), (phi0, phi2), (phi2, upper)];
    if gaps.iter().any(|(lo, hi)| sign_constant_on(f, *lo, *hi).is_none()) {
        return ConditionCheck::fail(format!("f has a zero in [{lower}, {upper}] besides the three roots"));
    }
    ConditionCheck::pass(format!(
        "f vanishes on [{lower}, {upper}] only at {phi1}, {phi0}, {phi2}; f' = {d1}, {d0}, {d2}"
    ))
}

fn check_a3_side<F: Nonlinearity + ?Sized>(
    f: &F,
    roots: &CubicRoots,
    g: f64,
    left: bool,
) -> ConditionCheck {
    let side = if left { "g_a" } else { "g_b" };
    let own_root = if left { roots.phi1 } else { roots.phi2 };
    if (g - own_root).abs() <= roots.tol() {
        return ConditionCheck::degenerate(format!(
            "{side} = {g} coincides with its stable root {own_root}; no boundary layer, integral clause vacuous"
        ));
    }
    if !(roots.phi1 < g && g < roots.phi2) {
        return ConditionCheck::fail(format!(
            "{side} = {g} not strictly between phi1 = {} and phi2 = {}",
            roots.phi1, roots.phi2
        ));
    }
    // Left: int_{phi1}^{y} f > 0 for y in (phi1, g_a]. Right: int_{phi2}^{y} f > 0 for y in [g_b, phi2).
    const SAMPLES: usize = 64;
    let tol = 1e-13 * roots.half_span().powi(4).max(1e-300);
    for k in 0..SAMPLES {
        let s = (k + 1) as f64 / SAMPLES as f64;
        let (from, y) = if left {
            (roots.phi1, roots.phi1 + s * (g - roots.phi1))
        } else {
            let s = k as f64 / SAMPLES as f64;
            (roots.phi2, g + s * (roots.phi2 - g))
        };
        let integral = adaptive_simpson(|u| f.value(u), from, y, tol).value;
        if integral <= 0.0 {
            return ConditionCheck::fail(format!("{side}: int from {from} to {y} of f = {integral} is not positive"));
        }
    }
    ConditionCheck::pass(format!("{side} = {g} strictly inside the roots; integral clause verified"))
}

fn check_a3<F: Nonlinearity + ?Sized>(f: &F, roots: &CubicRoots, bcs: (f64, f64)) -> ConditionCheck {
    let left = check_a3_side(f, roots, bcs.0, true);
    let right = check_a3_side(f, roots, bcs.1, false);
    let verdict = match (left.verdict, right.verdict) {
        (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
        (Verdict::Pass, Verdict::Pass) => Verdict::Pass,
        _ => Verdict::DegenerateAccepted,
    };
    ConditionCheck { verdict, detail: format!("left: {}; right: {}", left.detail, right.detail) }
}

fn check_a5(roots: &CubicRoots, bcs: (f64, f64), u0: &[f64]) -> ConditionCheck {
    let tol = roots.tol();
    let n = u0.len();
    if (u0[0] - bcs.0).abs() > tol || (u0[n - 1] - bcs.1).abs() > tol {
        return ConditionCheck::fail(format!(
            "u0 endpoints ({}, {}) differ from the boundary data ({}, {})",
            u0[0], u0[n - 1], bcs.0, bcs.1
        ));
    }
    if let Some((i, v)) = u0
        .iter()
        .enumerate()
        .find(|(_, v)| **v < roots.phi1 - tol || **v > roots.phi2 + tol)
    {
        return ConditionCheck::fail(format!(
            "u0[{i}] = {v} outside [{}, {}]",
            roots.phi1, roots.phi2
        ));
    }
    ConditionCheck::pass("u0 matches the boundary data and stays between phi1 and phi2")
}

fn check_a6(roots: &CubicRoots, grid: &Grid1D, u0: &[f64], x0: f64, j: f64, j_zero: bool) -> ConditionCheck {
    let phi0 = roots.phi0;
    let xs = &grid.nodes;
    let n = xs.len();
    let left_strict = j_zero || j < 0.0;
    let right_strict = j_zero || j > 0.0;

    // Largest x- in (a, x0) satisfying the left clause.
    let x_minus = if left_strict {
        let prefix = u0.iter().take_while(|v| **v < phi0).count();
        (1..prefix).rev().map(|i| xs[i]).find(|x| *x < x0)
    } else {
        (1..n).rev().map(|i| (xs[i], u0[i])).find(|(x, v)| *x < x0 && *v < phi0).map(|(x, _)| x)
    };
    // Smallest x+ in (x0, b) satisfying the right clause.
    let x_plus = if right_strict {
        let suffix = u0.iter().rev().take_while(|v| **v > phi0).count();
        (n - suffix..n - 1).map(|i| xs[i]).find(|x| *x > x0)
    } else {
        (0..n - 1).map(|i| (xs[i], u0[i])).find(|(x, v)| *x > x0 && *v > phi0).map(|(x, _)| x)
    };

    match (x_minus, x_plus) {
        (Some(lo), Some(hi)) => ConditionCheck::pass(format!(
            "x- = {lo} with u0 < phi0 on [a, x-]; x+ = {hi} with u0 > phi0 on [x+, b]"
        )),
        (None, _) => ConditionCheck::fail(format!(
            "no x- in (a, x0) with u0 < phi0 = {phi0} on [a, x-] (u0(a) = {})",
            u0[0]
        )),
        (_, None) => ConditionCheck::fail(format!(
            "no x+ in (x0, b) with u0 > phi0 = {phi0} on [x+, b] (u0(b) = {})",
            u0[n - 1]
        )),
    }
}

/// Check (A1)-(A6) for the cubic with boundary data `bcs` and nodal initial data `u0`.
pub fn check_conditions<F: Nonlinearity + ?Sized>(
    f: &F,
    roots: &CubicRoots,
    bcs: (f64, f64),
    u0: &[f64],
    grid: &Grid1D,
) -> Result<ConditionsReport> {
    ensure(u0.len() == grid.n_nodes(), || {
        format!("u0 has {} values for {} nodes", u0.len(), grid.n_nodes())
    })?;
    let (a, b) = (grid.a, grid.b);
    let j = compute_j(f, roots.phi1, roots.phi2)?;
    let j_zero = j.abs() <= 1e-10 * roots.half_span().powi(4);

    let a1 = check_a1(f, roots);
    let x0 = transition_point(f, roots.phi1, roots.phi2, a, b)?;

    let (a2, a4) = if j_zero {
        (
            ConditionCheck::degenerate(format!(
                "J = {j:e} vanishes identically on [{a}, {b}]; dJ/dx(x0) < 0 cannot hold, accepted as the balanced case"
            )),
            ConditionCheck::pass("J = 0 identically: its zero set is the single segment [a, b]"),
        )
    } else {
        (
            ConditionCheck::fail(format!(
                "J = {j:e} is a nonzero constant, so it has no zero in (a, b)"
            )),
            ConditionCheck::pass("J is a nonzero constant: its zero set is empty"),
        )
    };

    Ok(ConditionsReport {
        a1,
        a2,
        a3: check_a3(f, roots, bcs),
        a4,
        a5: check_a5(roots, bcs, u0),
        a6: check_a6(roots, grid, u0, x0, j, j_zero),
        j_value: j,
        j_identically_zero: j_zero,
        x0_predicted: x0,
        initial_crossing: level_crossing(grid, u0, roots.phi0),
    })
}

/// Distance of a stationary profile from the piecewise limit, outside the layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitComparison {
    pub x0_observed: f64,
    pub sup_error_left: f64,
    pub sup_error_right: f64,
    pub layer_width_used: f64,
}

/// Compare `profile` against the limit, excluding `(x0 - w eps, x0 + w eps)`.
///
/// `sup_error_left` is `max |u|` over nodes left of the excluded band and
/// `sup_error_right` is `max |u - 2A|` over nodes right of it.
pub fn compare_to_limit(
    profile: &[f64],
    grid: &Grid1D,
    x0: f64,
    dc: &DerivedConstants,
    layer_halfwidth_in_eps: f64,
) -> Result<LimitComparison> {
    ensure(profile.len() == grid.n_nodes(), || {
        format!("profile has {} values for {} nodes", profile.len(), grid.n_nodes())
    })?;
    ensure(layer_halfwidth_in_eps >= 0.0, || "layer half-width must be non-negative".into())?;
    let level = dc.half_step;
    let x0_observed = level_crossing(grid, profile, level).ok_or(Error::NoCrossing { level })?;
    let band = layer_halfwidth_in_eps * dc.eps;
    let mut left = 0.0f64;
    let mut right = 0.0f64;
    for (x, u) in grid.nodes.iter().zip(profile) {
        if *x < x0 - band {
            left = left.max(u.abs());
        } else if *x > x0 + band {
            right = right.max((u - dc.full_step).abs());
        }
    }
    Ok(LimitComparison { x0_observed, sup_error_left: left, sup_error_right: right, layer_width_used: band })
}

/// Conditions plus the stationary-profile comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CslsReport {
    pub conditions: ConditionsReport,
    pub x0_predicted: f64,
    pub x0_observed: f64,
    pub sup_error_left: f64,
    pub sup_error_right: f64,
    pub layer_width_used: f64,
    pub stationary_tau: f64,
}

/// Settings for [`run_csls_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CslsCheckConfig {
    pub n_intervals: usize,
    pub solver: SolverConfig,
    pub stationary_tol: f64,
    pub tau_max: f64,
    pub layer_halfwidth_in_eps: f64,
}

/// Check the conditions on the payoff data, march to a stationary state and
/// compare it with the limit profile.
pub fn run_csls_check(
    params: &MarketParams,
    contract: &ContractSpec,
    cfg: &CslsCheckConfig,
) -> Result<CslsReport> {
    let dc = derive_constants(params, contract)?;
    let grid = Grid1D::corridor(contract, cfg.n_intervals)?;
    let f = cubic_nonlinearity(&dc);
    let roots = CubicRoots::from_constants(&dc)?;
    let bcs = boundary_values(&dc);
    let u0 = payoff_nodes(&grid, contract, &dc);
    let conditions = check_conditions(&f, &roots, bcs, &u0, &grid)?;
    let stationary =
        march_to_stationary(&grid, dc.eps, &f, &u0, bcs, &cfg.solver, cfg.stationary_tol, cfg.tau_max)?;
    let cmp = compare_to_limit(&stationary.profile, &grid, dc.x0, &dc, cfg.layer_halfwidth_in_eps)?;
    Ok(CslsReport {
        x0_predicted: conditions.x0_predicted,
        conditions,
        x0_observed: cmp.x0_observed,
        sup_error_left: cmp.sup_error_left,
        sup_error_right: cmp.sup_error_right,
        layer_width_used: cmp.layer_width_used,
        stationary_tau: stationary.tau_reached,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::{CubicNonlinearity, NoReaction};

    fn reference() -> (MarketParams, ContractSpec, DerivedConstants, Grid1D) {
        let params = MarketParams::new(0.10, 0.03, 0.02, 0.01, 0.0).unwrap();
        let contract = ContractSpec::from_corridor(20.0, 0.25, 0.1, 100.0, 1.0, 1.0).unwrap();
        let dc = derive_constants(&params, &contract).unwrap();
        let grid = Grid1D::corridor(&contract, 100).unwrap();
        (params, contract, dc, grid)
    }

    #[test]
    fn j_examples() {
        let a = 40.0;
        let balanced = CubicNonlinearity::new(a, 2.0 * a);
        assert!(compute_j(&balanced, 0.0, 2.0 * a).unwrap().abs() < 1e-10 * a.powi(4));

        // int_0^{3A} u (u - A)(u - 3A) du = -9 A^4 / 4
        let skewed = CubicNonlinearity::new(a, 3.0 * a);
        let j = compute_j(&skewed, 0.0, 3.0 * a).unwrap();
        assert!((j + 9.0 * a.powi(4) / 4.0).abs() < 1e-9 * a.powi(4), "J = {j}");

        assert_eq!(compute_j(&NoReaction, 0.0, 1.0).unwrap(), 0.0);
        assert!(compute_j(&NoReaction, 1.0, 0.0).is_err());
    }

    #[test]
    fn j_is_antisymmetric_under_reflection_for_balanced_cubic() {
        let a = 7.0;
        let f = CubicNonlinearity::new(a, 2.0 * a);
        for y in [0.5, 3.0, 6.0, 9.5, 13.0] {
            let lhs = compute_j(&f, 0.0, y).unwrap();
            let rhs = compute_j(&f, 2.0 * a - y, 2.0 * a).unwrap();
            // f(2A - u) = -f(u), so the two partial integrals cancel.
            assert!((lhs + rhs).abs() < 1e-9 * a.powi(4), "y {y}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn transition_point_examples() {
        let a = 40.0;
        let f = CubicNonlinearity::new(a, 2.0 * a);
        assert_eq!(f.derivative(0.0), f.derivative(2.0 * a));
        assert!((transition_point(&f, 0.0, 2.0 * a, -2.0, 4.0).unwrap() - 1.0).abs() < 1e-15);

        // f'(phi2) = 4 f'(phi1) puts x0 two thirds of the way across.
        let g = crate::transform::FnNonlinearity::new(|u: f64| u, |u: f64| if u > 0.5 { 4.0 } else { 1.0 });
        assert!((transition_point(&g, 0.0, 1.0, 0.0, 3.0).unwrap() - 2.0).abs() < 1e-15);

        assert!(transition_point(&f, 0.0, 2.0 * a, 1.0, 1.0).is_err());
        assert!(transition_point(&f, 0.0, a, 0.0, 1.0).is_err());
    }

    #[test]
    fn limit_profile_examples() {
        let (_, contract, dc, _) = reference();
        assert_eq!(limit_profile(contract.k_minus, dc.x0, &dc), 0.0);
        assert!((limit_profile(contract.k_plus, dc.x0, &dc) - 80.0).abs() < 1e-12);
        assert_eq!(limit_profile(dc.x0, dc.x0, &dc), dc.half_step);
    }

    #[test]
    fn reference_setup_satisfies_conditions() {
        let (_, contract, dc, grid) = reference();
        let f = cubic_nonlinearity(&dc);
        let roots = CubicRoots::from_constants(&dc).unwrap();
        let u0 = payoff_nodes(&grid, &contract, &dc);
        let r = check_conditions(&f, &roots, boundary_values(&dc), &u0, &grid).unwrap();
        assert_eq!(r.a1.verdict, Verdict::Pass);
        assert_eq!(r.a2.verdict, Verdict::DegenerateAccepted);
        assert!(r.a3.holds());
        assert_eq!(r.a4.verdict, Verdict::Pass);
        assert_eq!(r.a5.verdict, Verdict::Pass);
        assert_eq!(r.a6.verdict, Verdict::Pass);
        assert!(r.j_identically_zero);
        assert!((r.x0_predicted - dc.x0).abs() < 1e-12);
        // The payoff crosses A where e^y - X = A.
        let crossing = r.initial_crossing.unwrap();
        assert!((crossing - 60f64.ln()).abs() < grid.h);
    }

    #[test]
    fn a3_strict_interior_passes_and_outside_fails() {
        let (_, _, dc, grid) = reference();
        let f = cubic_nonlinearity(&dc);
        let roots = CubicRoots::from_constants(&dc).unwrap();
        let inside = check_a3(&f, &roots, (5.0, 75.0));
        assert_eq!(inside.verdict, Verdict::Pass, "{}", inside.detail);
        assert_eq!(check_a3(&f, &roots, (0.0, 80.0)).verdict, Verdict::DegenerateAccepted);
        assert_eq!(check_a3(&f, &roots, (0.0, 80.5)).verdict, Verdict::Fail);
        assert_eq!(check_a3(&f, &roots, (-1.0, 80.0)).verdict, Verdict::Fail);
        // A right datum on the lower root is the wrong side, not a degenerate case.
        assert_eq!(check_a3(&f, &roots, (0.0, 0.0)).verdict, Verdict::Fail);
        let _ = grid;
    }

    #[test]
    fn a6_fails_on_the_left_for_constant_data_above_phi0() {
        let (_, _, dc, grid) = reference();
        let f = cubic_nonlinearity(&dc);
        let roots = CubicRoots::from_constants(&dc).unwrap();
        let u0 = vec![1.1 * dc.half_step; grid.n_nodes()];
        let r = check_conditions(&f, &roots, (u0[0], u0[0]), &u0, &grid).unwrap();
        assert_eq!(r.a6.verdict, Verdict::Fail);
        assert!(r.a6.detail.contains("no x-"), "{}", r.a6.detail);
    }

    #[test]
    fn a5_detects_out_of_range_data() {
        let (_, contract, dc, grid) = reference();
        let f = cubic_nonlinearity(&dc);
        let roots = CubicRoots::from_constants(&dc).unwrap();
        let mut u0 = payoff_nodes(&grid, &contract, &dc);
        u0[50] = -1.0;
        let r = check_conditions(&f, &roots, boundary_values(&dc), &u0, &grid).unwrap();
        assert_eq!(r.a5.verdict, Verdict::Fail);
    }

    #[test]
    fn a1_rejects_wrong_sign_pattern() {
        let roots = CubicRoots::new(0.0, 1.0, 2.0).unwrap();
        let flipped = crate::transform::FnNonlinearity::new(
            |u: f64| -u * (u - 1.0) * (u - 2.0),
            |u: f64| -(3.0 * u * u - 6.0 * u + 2.0),
        );
        assert_eq!(check_a1(&flipped, &roots).verdict, Verdict::Fail);
        assert_eq!(check_a1(&CubicNonlinearity::new(1.0, 2.0), &roots).verdict, Verdict::Pass);
    }

    #[test]
    fn unbalanced_cubic_fails_a2() {
        let roots = CubicRoots::new(0.0, 1.0, 3.0).unwrap();
        let grid = Grid1D::new(-1.0, 1.0, 21).unwrap();
        let u0: Vec<f64> = grid.nodes.iter().map(|x| if *x < 0.0 { 0.0 } else { 3.0 }).collect();
        let r = check_conditions(&CubicNonlinearity::new(1.0, 3.0), &roots, (0.0, 3.0), &u0, &grid).unwrap();
        assert_eq!(r.a2.verdict, Verdict::Fail);
        assert!(!r.j_identically_zero);
    }

    #[test]
    fn compare_to_limit_examples() {
        let (_, _, dc, grid) = reference();
        let exact: Vec<f64> = grid.nodes.iter().map(|x| limit_profile(*x, dc.x0, &dc)).collect();
        let c = compare_to_limit(&exact, &grid, dc.x0, &dc, 10.0).unwrap();
        assert_eq!((c.sup_error_left, c.sup_error_right), (0.0, 0.0));
        assert!((c.x0_observed - dc.x0).abs() <= grid.h);

        let flat = vec![0.0; grid.n_nodes()];
        assert!(matches!(compare_to_limit(&flat, &grid, dc.x0, &dc, 10.0), Err(Error::NoCrossing { .. })));
    }
}
