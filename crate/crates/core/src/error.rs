use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes shared by every stage of the pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The observed price lies outside the region the Black-Scholes formula can reach.
    #[error("no implied volatility: {0}")]
    NoSolution(String),

    #[error("implied volatility solver hit the iteration limit ({iterations}) with residual {residual:e}")]
    IterLimit { iterations: usize, residual: f64 },

    #[error("Picard iteration did not converge at step {step} (tau = {tau}): last update {last_update:e}")]
    PicardDiverged { step: usize, tau: f64, last_update: f64 },

    #[error("non-finite value produced at step {step} (tau = {tau})")]
    NonFinite { step: usize, tau: f64 },

    #[error("no stationary state within tau <= {tau_reached}: last rate {last_rate:e}")]
    NotConverged { tau_reached: f64, last_rate: f64 },

    #[error("profile never crosses the level {level}")]
    NoCrossing { level: f64 },

    /// Equal market prices of risk: the two-asset strategy does not exist.
    #[error("sharpe gap is zero; the market is arbitrage-free and delta2 is undefined")]
    SharpeGapZero,

    #[error("S1 = {s1} is outside the corridor [{lower}, {upper}]")]
    OutOfCorridor { s1: f64, lower: f64, upper: f64 },

    #[error("no point of the curve produced an implied volatility")]
    EmptyCurve,
}

impl Error {
    /// True for failures of the numerical methods (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::InvalidInput(_))
    }
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidInput(msg()))
    }
}
