//! Continuous-time closed forms for linear, inverse and quanto perpetual
//! futures with constant coefficients, the equalizing interest factors, and
//! the funding rate that pins a perpetual price to a target function.

use crate::discrete::FuturesKind;
use crate::error::{positive, PricingError, Result};
use crate::model::{FundingSpec, GbmModel, PriceQuote, RateEnvironment, SmoothPayoff, TimeMode};

pub const LINEAR_INTEGRABILITY: &str = "kappa + r_b - r_a > 0";
pub const INVERSE_INTEGRABILITY: &str = "kappa + r_a - r_b > 0";
pub const QUANTO_INTEGRABILITY: &str = "r_c - sigma_x.sigma_z - r_a + kappa > 0";

#[derive(Debug, Clone, PartialEq)]
pub struct CtPriceInputs {
    pub env: RateEnvironment,
    pub funding: FundingSpec,
    pub model: GbmModel,
}

impl CtPriceInputs {
    pub fn new(env: RateEnvironment, funding: FundingSpec, model: GbmModel) -> Result<Self> {
        env.require(TimeMode::ContinuousTime)?;
        Ok(CtPriceInputs {
            env,
            funding,
            model,
        })
    }
}

/// `(kappa - iota) * spot / denominator`, after the two admissibility checks.
fn price(
    spot: f64,
    funding: &FundingSpec,
    denominator: f64,
    condition: &'static str,
) -> Result<PriceQuote> {
    if !(denominator > 0.0) {
        return Err(PricingError::DivergentPrice { condition });
    }
    funding.require_positive_premium()?;
    Ok(PriceQuote::closed_form(
        (funding.kappa() - funding.iota()) * spot / denominator,
    ))
}

pub fn ct_linear_price(inputs: &CtPriceInputs) -> Result<PriceQuote> {
    let CtPriceInputs { env, funding, model } = inputs;
    price(
        model.x0(),
        funding,
        funding.kappa() + env.r_b() - env.r_a(),
        LINEAR_INTEGRABILITY,
    )
}

/// Inverse price `x (kappa + r_a - r_b) / (kappa - iota)`, the reciprocal of
/// the b-measure expectation of `1/x` at the random maturity.
pub fn ct_inverse_price(inputs: &CtPriceInputs) -> Result<PriceQuote> {
    let CtPriceInputs { env, funding, model } = inputs;
    let kappa = funding.kappa();
    if !(kappa + env.r_a() - env.r_b() > 0.0) {
        return Err(PricingError::DivergentPrice {
            condition: INVERSE_INTEGRABILITY,
        });
    }
    funding.require_positive_premium()?;
    Ok(PriceQuote::closed_form(
        model.x0() * (kappa + env.r_a() - env.r_b()) / (kappa - funding.iota()),
    ))
}

/// Quanto price on the c/a rate `z`, margined in `b`. The b-measure drift of
/// `z` carries the convexity term `sigma_x . sigma_z`.
pub fn ct_quanto_price(inputs: &CtPriceInputs) -> Result<PriceQuote> {
    let CtPriceInputs { env, funding, model } = inputs;
    let (z0, _) = model.require_quanto()?;
    let drift = model.z_drift_b(env)?;
    price(z0, funding, funding.kappa() - drift, QUANTO_INTEGRABILITY)
}

pub fn ct_price(kind: FuturesKind, inputs: &CtPriceInputs) -> Result<PriceQuote> {
    match kind {
        FuturesKind::Linear => ct_linear_price(inputs),
        FuturesKind::Inverse => ct_inverse_price(inputs),
    }
}

/// Interest factor making the perpetual price equal to the spot. The caller
/// must still ensure it lies below the contract's premium rate.
pub fn ct_equalizing_iota(env: &RateEnvironment, kind: FuturesKind) -> Result<f64> {
    env.require(TimeMode::ContinuousTime)?;
    Ok(match kind {
        FuturesKind::Linear => env.r_a() - env.r_b(),
        FuturesKind::Inverse => env.r_b() - env.r_a(),
    })
}

/// Interest factor that sets the quanto price to `z`, obtained by solving the
/// quanto closed form for `f = z`: `r_a - r_c + sigma_x . sigma_z`.
///
/// Derived here rather than taken from a published result.
pub fn ct_quanto_equalizing_iota(env: &RateEnvironment, model: &GbmModel) -> Result<f64> {
    env.require(TimeMode::ContinuousTime)?;
    model.z_drift_b(env)
}

/// Funding rate per unit time under which the perpetual price of a contract
/// tracking `phi` equals `phi(x)`:
/// `phi'(x) (r_a - r_b) x + phi''(x) |Sigma_x|^2 / 2`.
///
/// `sigma_norm_sq` is the squared norm of the diffusion coefficient of `x`
/// itself (for a lognormal rate, `|sigma_x|^2 x^2`).
pub fn funding_rate_for_target(
    phi: &dyn SmoothPayoff,
    x: f64,
    env: &RateEnvironment,
    sigma_norm_sq: f64,
) -> Result<f64> {
    positive("x", x)?;
    if !(sigma_norm_sq >= 0.0 && sigma_norm_sq.is_finite()) {
        return Err(PricingError::invalid(
            "sigma_norm_sq",
            sigma_norm_sq,
            "must be finite and non-negative",
        ));
    }
    let (d1, d2) = (phi.derivative(x), phi.second_derivative(x));
    if !d1.is_finite() || !d2.is_finite() {
        return Err(PricingError::invalid("phi derivative", if d1.is_finite() { d2 } else { d1 }, "must be finite"));
    }
    Ok(d1 * env.spread() * x + 0.5 * d2 * sigma_norm_sq)
}
