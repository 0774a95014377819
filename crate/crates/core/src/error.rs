use thiserror::Error;

use crate::model::TimeMode;

/// Errors raised by the pricers, oracles and simulators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PricingError {
    /// The series defining the price does not converge.
    #[error("divergent price: condition `{condition}` violated")]
    DivergentPrice { condition: &'static str },

    /// The premium rate does not exceed the interest factor.
    #[error("non-positive price: condition `{condition}` violated")]
    NonPositivePrice { condition: &'static str },

    #[error("premium too small to equalize: interest factor {iota} is not below kappa {kappa}")]
    PremiumTooSmall { iota: f64, kappa: f64 },

    #[error("operation requires {expected:?} rates but the environment is {found:?}")]
    ModeMismatch { expected: TimeMode, found: TimeMode },

    #[error("invalid parameter: {name} = {value} ({reason})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("missing input: {0}")]
    MissingInput(&'static str),

    #[error("unsupported representation: {0}")]
    UnsupportedRepresentation(&'static str),

    #[error("truncation horizon {horizon} leaves tail bound {tail_bound:e} above tolerance {tol:e}")]
    HorizonTooShort {
        horizon: usize,
        tail_bound: f64,
        tol: f64,
    },

    #[error("grid point {x} has a stencil [{lo}, {hi}] that crosses the kink at {kink}")]
    StencilCrossesKink { x: f64, lo: f64, hi: f64, kink: f64 },
}

impl PricingError {
    pub(crate) fn invalid(name: &'static str, value: f64, reason: &'static str) -> Self {
        PricingError::InvalidParameter {
            name,
            value,
            reason,
        }
    }

    /// The inequality that failed, for precondition errors.
    pub fn condition(&self) -> Option<&'static str> {
        match self {
            PricingError::DivergentPrice { condition }
            | PricingError::NonPositivePrice { condition } => Some(condition),
            PricingError::PremiumTooSmall { .. } => Some("iota < kappa"),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, PricingError>;

/// Rejects NaN and infinities.
pub(crate) fn finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(PricingError::invalid(name, value, "must be finite"))
    }
}

pub(crate) fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(PricingError::invalid(name, value, "must be positive"))
    }
}
