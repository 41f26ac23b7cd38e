use thiserror::Error;

use crate::exponents::Regime;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates its admissible range.
    #[error("invalid parameter `{name}` = {value}: {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("source exponent {exponent} is not integrable against s^(n-1) near the origin (need exponent > {bound})")]
    NonIntegrableSource { exponent: f64, bound: f64 },

    #[error("quadrature on [{lower}, {upper}] did not reach tolerance: estimate {estimate}, error {error}")]
    Quadrature {
        lower: f64,
        upper: f64,
        estimate: f64,
        error: f64,
    },

    #[error("operation requires the {expected:?} regime, context is {found:?}")]
    RegimeMismatch { expected: Regime, found: Regime },

    #[error("radius {radius} lies outside the admissible window [{lower}, {upper}]")]
    OutsideWindow { radius: f64, lower: f64, upper: f64 },

    #[error("distribution tail decays like alpha^{slope}, too slowly for exponent {r_exp}")]
    DivergentTail { slope: f64, r_exp: f64 },

    #[error("divergence probe was inconclusive (best fit R^2 = {best_r_squared})")]
    Inconclusive { best_r_squared: f64 },

    #[error("level-set pair list is empty")]
    EmptyPairs,

    #[error("level set at alpha = {alpha} has zero measure")]
    ZeroMeasure { alpha: f64 },

    #[error("{0}")]
    Numerics(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, value: f64, constraint: &'static str) -> Self {
        Error::InvalidParameter {
            name,
            value,
            constraint,
        }
    }
}
