//! Arbitrage hedging in a market with two assets driven by one Wiener process.
//!
//! The option price `V(S1, t)` of a call on the first asset is obtained from a
//! singularly perturbed reaction-diffusion problem
//!
//! ```text
//! eps^2 u_yy - u_tau = u (u - A) (u - B),    B = 2A,
//! ```
//!
//! whose solutions form a step-like contrast structure. The second asset
//! carries the reaction term through the hedge ratio `delta2`, which lets the
//! seller hold an option whose value is negligible below the step.
//!
//! Modules, bottom up:
//! - [`market`]: parameters, the sharpe gap, shared-driver GBM paths.
//! - [`black_scholes`]: closed form price, delta, implied volatility.
//! - [`transform`]: financial <-> computational coordinates, derived constants.
//! - [`pde`]: Crank-Nicolson marching with Picard iteration.
//! - [`csls`]: contrast-structure conditions and limit-profile comparison.
//! - [`hedging`]: `(delta1, delta2)` and Monte Carlo hedge simulation.
//! - [`smile`]: price and implied-volatility curves across strikes.
//! - [`config`]: experiment configuration shared with the CLI.

pub mod black_scholes;
pub mod config;
pub mod csls;
pub mod error;
pub mod hedging;
pub mod market;
pub mod pde;
pub mod quad;
pub mod smile;
pub mod transform;

mod sum;

pub use error::{Error, Result};
pub use sum::NeumaierSum;
