//! Experiment configuration shared by the command line front end.
//!
//! [`ExperimentConfig::validate`] collects every problem instead of stopping
//! at the first one.

use serde::{Deserialize, Serialize};

use crate::csls::CslsCheckConfig;
use crate::hedging::{HedgeSimConfig, HedgeStrategy};
use crate::market::MarketParams;
use crate::pde::SolverConfig;
use crate::smile::{ReactionMode, SmileSettings};
use crate::transform::ContractSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractSection {
    pub strike: f64,
    pub maturity: f64,
    /// Lower corridor price at expiry.
    pub s_minus: f64,
    /// Upper corridor price at expiry.
    pub s_plus: f64,
    #[serde(default = "one")]
    pub alpha1: f64,
    #[serde(default = "one")]
    pub alpha2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub intervals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub dt: f64,
    #[serde(default = "default_picard_tol")]
    pub picard_tol: f64,
    #[serde(default = "default_picard_max")]
    pub picard_max: usize,
    #[serde(default = "one_usize")]
    pub snapshot_stride: usize,
    #[serde(default)]
    pub reaction: ReactionMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CslsSection {
    /// Half-width of the excluded layer, in units of eps.
    #[serde(default = "default_layer")]
    pub layer_halfwidth: f64,
    #[serde(default = "default_stationary_tol")]
    pub stationary_tol: f64,
    #[serde(default = "default_tau_max")]
    pub tau_max: f64,
}

impl Default for CslsSection {
    fn default() -> Self {
        Self {
            layer_halfwidth: default_layer(),
            stationary_tol: default_stationary_tol(),
            tau_max: default_tau_max(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub s1_0: f64,
    #[serde(default = "one")]
    pub s2_0: f64,
    #[serde(default)]
    pub strategy: HedgeStrategy,
    /// Volatility of the reported Black-Scholes premium; defaults to sigma1.
    #[serde(default)]
    pub bs_sigma: Option<f64>,
    #[serde(default)]
    pub ledger: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmileSection {
    pub spot: f64,
    pub strikes: Vec<f64>,
    pub maturities: Vec<f64>,
    /// Volatility of the classical curve; defaults to sigma1.
    #[serde(default)]
    pub sigma_ref: Option<f64>,
    /// Skew fit window as fractions of the spot.
    #[serde(default = "default_window")]
    pub skew_window: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    pub market: MarketParams,
    pub contract: ContractSection,
    pub grid: GridSection,
    pub solver: SolverSection,
    #[serde(default)]
    pub csls: CslsSection,
    pub mc: Option<McSection>,
    pub smile: Option<SmileSection>,
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn default_picard_tol() -> f64 {
    1e-10
}
fn default_picard_max() -> usize {
    50
}
fn default_layer() -> f64 {
    10.0
}
fn default_stationary_tol() -> f64 {
    1e-6
}
fn default_tau_max() -> f64 {
    10.0
}
fn default_window() -> [f64; 2] {
    [0.8, 1.2]
}
fn default_output_dir() -> String {
    "out".into()
}

fn positive(errs: &mut Vec<String>, name: &str, x: f64) {
    if !(x > 0.0 && x.is_finite()) {
        errs.push(format!("{name} must be positive and finite, got {x}"));
    }
}

impl ExperimentConfig {
    /// Every schema violation, in a stable order; empty when valid.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if let Err(e) = self.market.validate() {
            errs.push(format!("market: {e}"));
        }
        let c = &self.contract;
        for (name, x) in [
            ("contract.strike", c.strike),
            ("contract.maturity", c.maturity),
            ("contract.s_minus", c.s_minus),
            ("contract.s_plus", c.s_plus),
            ("contract.alpha1", c.alpha1),
            ("contract.alpha2", c.alpha2),
        ] {
            positive(&mut errs, name, x);
        }
        if errs.iter().all(|e| !e.starts_with("contract")) {
            if !(c.s_minus < 1.0 && 1.0 < c.s_plus) {
                errs.push(format!(
                    "contract: corridor must satisfy s_minus < 1 < s_plus, got [{}, {}]",
                    c.s_minus, c.s_plus
                ));
            } else if let Err(e) = self.contract_spec() {
                errs.push(format!("contract: {e}"));
            }
        }
        if self.grid.intervals < 2 {
            errs.push(format!("grid.intervals must be at least 2, got {}", self.grid.intervals));
        }
        if let Err(e) = self.solver_config().validate() {
            errs.push(format!("solver: {e}"));
        }
        if !(self.csls.layer_halfwidth >= 0.0 && self.csls.layer_halfwidth.is_finite()) {
            errs.push(format!("csls.layer_halfwidth must be non-negative, got {}", self.csls.layer_halfwidth));
        }
        positive(&mut errs, "csls.stationary_tol", self.csls.stationary_tol);
        positive(&mut errs, "csls.tau_max", self.csls.tau_max);
        if let Some(mc) = &self.mc {
            if mc.n_paths == 0 {
                errs.push("mc.n_paths must be at least 1".into());
            }
            if mc.n_steps == 0 {
                errs.push("mc.n_steps must be at least 1".into());
            }
            positive(&mut errs, "mc.s1_0", mc.s1_0);
            positive(&mut errs, "mc.s2_0", mc.s2_0);
            if let Some(s) = mc.bs_sigma {
                positive(&mut errs, "mc.bs_sigma", s);
            }
        }
        if let Some(sm) = &self.smile {
            positive(&mut errs, "smile.spot", sm.spot);
            if sm.strikes.is_empty() {
                errs.push("smile.strikes is empty".into());
            }
            if sm.strikes.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                errs.push("smile.strikes must be positive".into());
            }
            if sm.strikes.windows(2).any(|w| w[0] >= w[1]) {
                errs.push("smile.strikes must be strictly increasing".into());
            }
            if let Some(top) = sm.strikes.last().filter(|x| **x >= c.s_plus) {
                errs.push(format!("smile.strikes: {top} is not below s_plus = {}", c.s_plus));
            }
            if sm.maturities.is_empty() {
                errs.push("smile.maturities is empty".into());
            }
            if sm.maturities.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
                errs.push("smile.maturities must be positive".into());
            }
            if let Some(s) = sm.sigma_ref {
                positive(&mut errs, "smile.sigma_ref", s);
            }
            let [lo, hi] = sm.skew_window;
            if !(0.0 <= lo && lo < hi && hi.is_finite()) {
                errs.push(format!("smile.skew_window must satisfy 0 <= lo < hi, got [{lo}, {hi}]"));
            }
        }
        if self.output_dir.trim().is_empty() {
            errs.push("output_dir is empty".into());
        }
        errs
    }

    /// Multiply the grid intervals by `n` and divide the time step by `n`.
    pub fn refined(&self, n: usize) -> Self {
        let mut c = self.clone();
        c.grid.intervals *= n;
        c.solver.dt /= n as f64;
        c
    }

    pub fn contract_spec(&self) -> crate::Result<ContractSpec> {
        let c = &self.contract;
        ContractSpec::from_corridor(c.strike, c.maturity, c.s_minus, c.s_plus, c.alpha1, c.alpha2)
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            picard_tol: self.solver.picard_tol,
            picard_max: self.solver.picard_max,
            snapshot_stride: self.solver.snapshot_stride,
            ..SolverConfig::new(self.solver.dt)
        }
    }

    pub fn csls_check_config(&self) -> CslsCheckConfig {
        CslsCheckConfig {
            n_intervals: self.grid.intervals,
            solver: self.solver_config(),
            stationary_tol: self.csls.stationary_tol,
            tau_max: self.csls.tau_max,
            layer_halfwidth_in_eps: self.csls.layer_halfwidth,
        }
    }

    pub fn hedge_sim_config(&self, mc: &McSection) -> HedgeSimConfig {
        HedgeSimConfig {
            strategy: mc.strategy,
            bs_sigma: mc.bs_sigma.unwrap_or(self.market.sigma1),
            record_ledger: mc.ledger,
        }
    }

    pub fn smile_settings(&self, sm: &SmileSection) -> SmileSettings {
        SmileSettings {
            spot: sm.spot,
            sigma_ref: sm.sigma_ref.unwrap_or(self.market.sigma1),
            n_intervals: self.grid.intervals,
            solver: self.solver_config(),
            reaction: self.solver.reaction,
            skew_window: (sm.skew_window[0], sm.skew_window[1]),
        }
    }
}
