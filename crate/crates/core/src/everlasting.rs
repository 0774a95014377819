//! Everlasting calls and puts under lognormal dynamics.
//!
//! The call price solves `kappa c = mu x c' + sigma^2 x^2 c'' / 2 +
//! kappa (x - K)^+` with `mu = r_a - r_b`; on each side of the strike the
//! bounded solution is a power of `x` whose exponents are the roots of the
//! characteristic quadratic, and the two pieces are pasted in C^1 at `K`.
//! Puts follow from put-call parity against the perpetual futures price
//! `f(x) = kappa x / (kappa - mu)`.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{positive, PricingError, Result};
use crate::model::{RateEnvironment, TimeMode};

pub const EVERLASTING_INTEGRABILITY: &str = "kappa - r_a + r_b > 0";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsEverlastingInputs {
    pub env: RateEnvironment,
    pub kappa: f64,
    pub strike: f64,
    /// Norm of the volatility vector of `x`.
    pub sigma_norm: f64,
    /// Spot; zero is allowed as the absorbing limit of the lognormal rate.
    pub spot: f64,
}

impl BsEverlastingInputs {
    pub fn new(
        env: RateEnvironment,
        kappa: f64,
        strike: f64,
        sigma_norm: f64,
        spot: f64,
    ) -> Result<Self> {
        env.require(TimeMode::ContinuousTime)?;
        positive("kappa", kappa)?;
        positive("strike", strike)?;
        if !(sigma_norm > 0.0 && sigma_norm.is_finite()) {
            return Err(PricingError::invalid(
                "sigma_norm",
                sigma_norm,
                "volatility must be positive",
            ));
        }
        if !(spot >= 0.0 && spot.is_finite()) {
            return Err(PricingError::invalid("spot", spot, "must be non-negative"));
        }
        if !(kappa - env.spread() > 0.0) {
            return Err(PricingError::DivergentPrice {
                condition: EVERLASTING_INTEGRABILITY,
            });
        }
        Ok(BsEverlastingInputs {
            env,
            kappa,
            strike,
            sigma_norm,
            spot,
        })
    }

    /// Same contract at another spot.
    pub fn at_spot(&self, spot: f64) -> Result<Self> {
        Self::new(self.env, self.kappa, self.strike, self.sigma_norm, spot)
    }

    fn drift(&self) -> f64 {
        self.env.spread()
    }

    fn sigma_sq(&self) -> f64 {
        self.sigma_norm * self.sigma_norm
    }

    /// Coefficients of the two branches of the call price.
    fn branch_coefficients(&self) -> (CharacteristicRoots, f64, f64) {
        let roots = roots_unchecked(self.drift(), self.sigma_sq(), self.kappa);
        let (pi, theta) = (roots.pi, roots.theta);
        let (mu, kappa) = (self.drift(), self.kappa);
        let denom = (pi - theta) * (kappa - mu);
        let below = (pi * mu - kappa) / denom;
        let above = (theta * mu - kappa) / denom;
        (roots, below, above)
    }
}

/// Roots `pi < 0 < 1 < theta` of
/// `mu xi + sigma^2 xi (xi - 1) / 2 - kappa = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicRoots {
    pub pi: f64,
    pub theta: f64,
}

fn roots_unchecked(mu: f64, sigma_sq: f64, kappa: f64) -> CharacteristicRoots {
    let a = 0.5 * sigma_sq;
    let b = mu - 0.5 * sigma_sq;
    let c = -kappa;
    let disc = (b * b - 4.0 * a * c).sqrt();
    // larger-magnitude root first, the other from the product c / a
    let q = -0.5 * (b + b.signum() * disc);
    let (r1, r2) = (q / a, c / q);
    if r1 < r2 {
        CharacteristicRoots { pi: r1, theta: r2 }
    } else {
        CharacteristicRoots { pi: r2, theta: r1 }
    }
}

pub fn characteristic_roots(inputs: &BsEverlastingInputs) -> Result<CharacteristicRoots> {
    Ok(roots_unchecked(inputs.drift(), inputs.sigma_sq(), inputs.kappa))
}

/// Perpetual futures price with premium rate `kappa` and no interest factor.
pub fn perpetual_reference_price(env: &RateEnvironment, kappa: f64, spot: f64) -> Result<f64> {
    env.require(TimeMode::ContinuousTime)?;
    positive("kappa", kappa)?;
    let denom = kappa - env.spread();
    if !(denom > 0.0) {
        return Err(PricingError::DivergentPrice {
            condition: EVERLASTING_INTEGRABILITY,
        });
    }
    Ok(kappa * spot / denom)
}

pub fn everlasting_call(inputs: &BsEverlastingInputs) -> Result<f64> {
    let (roots, below, above) = inputs.branch_coefficients();
    let (x, k) = (inputs.spot, inputs.strike);
    if x <= k {
        Ok(k * (x / k).powf(roots.theta) * below)
    } else {
        let f = perpetual_reference_price(&inputs.env, inputs.kappa, x)?;
        Ok(k * (x / k).powf(roots.pi) * above + f - k)
    }
}

/// Analytic delta of the everlasting call.
pub fn everlasting_call_delta(inputs: &BsEverlastingInputs) -> Result<f64> {
    let (roots, below, above) = inputs.branch_coefficients();
    let (x, k) = (inputs.spot, inputs.strike);
    let mu = inputs.drift();
    if x <= k {
        Ok(roots.theta * (x / k).powf(roots.theta - 1.0) * below)
    } else {
        Ok(roots.pi * (x / k).powf(roots.pi - 1.0) * above + inputs.kappa / (inputs.kappa - mu))
    }
}

/// Everlasting put via parity: `p = c + K - f(x)`.
pub fn everlasting_put(inputs: &BsEverlastingInputs) -> Result<f64> {
    let c = everlasting_call(inputs)?;
    let f = perpetual_reference_price(&inputs.env, inputs.kappa, inputs.spot)?;
    Ok(c + inputs.strike - f)
}

/// Price of a European call on `x` struck at `strike` with the quote rate
/// `r_a` as domestic rate and `r_b` as foreign yield.
pub fn european_call(spot: f64, strike: f64, r_a: f64, r_b: f64, sigma: f64, maturity: f64) -> f64 {
    (-r_a * maturity).exp() * expected_call_payoff(spot, strike, r_a - r_b, sigma, maturity)
}

/// `E[(x_t - K)^+]` for a lognormal rate started at `spot` with drift `drift`.
pub fn expected_call_payoff(spot: f64, strike: f64, drift: f64, sigma: f64, t: f64) -> f64 {
    let forward = spot * (drift * t).exp();
    if spot <= 0.0 {
        return 0.0;
    }
    if sigma * t.sqrt() == 0.0 {
        return (forward - strike).max(0.0);
    }
    let (d1, d2) = d1_d2(spot, strike, drift, 0.0, sigma, t);
    let n = std_normal();
    forward * n.cdf(d1) - strike * n.cdf(d2)
}

/// `E[(K - x_t)^+]`, from [`expected_call_payoff`] by parity.
pub fn expected_put_payoff(spot: f64, strike: f64, drift: f64, sigma: f64, t: f64) -> f64 {
    expected_call_payoff(spot, strike, drift, sigma, t) - spot * (drift * t).exp() + strike
}

pub fn european_call_delta(spot: f64, strike: f64, r_a: f64, r_b: f64, sigma: f64, maturity: f64) -> f64 {
    if spot <= 0.0 {
        return 0.0;
    }
    let (d1, _) = d1_d2(spot, strike, r_a, r_b, sigma, maturity);
    (-r_b * maturity).exp() * std_normal().cdf(d1)
}

fn d1_d2(spot: f64, strike: f64, r_a: f64, r_b: f64, sigma: f64, maturity: f64) -> (f64, f64) {
    let vol = sigma * maturity.sqrt();
    let d1 = ((spot / strike).ln() + (r_a - r_b + 0.5 * sigma * sigma) * maturity) / vol;
    (d1, d1 - vol)
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal is valid")
}

/// Second-order pricing ODE `rho w = mu x w' + sigma^2 x^2 w'' / 2 + l(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricingOde {
    pub rho: f64,
    pub drift: f64,
    pub sigma_sq: f64,
    /// Finite-difference step relative to `x`.
    pub rel_step: f64,
    /// Point where `w''` jumps; no stencil may straddle it.
    pub kink: Option<f64>,
}

impl PricingOde {
    /// ODE satisfied by everlasting prices with premium rate `kappa`.
    pub fn everlasting(env: &RateEnvironment, kappa: f64, sigma_norm: f64) -> Self {
        PricingOde {
            rho: kappa,
            drift: env.spread(),
            sigma_sq: sigma_norm * sigma_norm,
            rel_step: 1e-4,
            kink: None,
        }
    }

    pub fn with_kink(mut self, kink: f64) -> Self {
        self.kink = Some(kink);
        self
    }

    pub fn with_rel_step(mut self, rel_step: f64) -> Self {
        self.rel_step = rel_step;
        self
    }
}

/// Largest absolute residual `rho w - mu x w' - sigma^2 x^2 w'' / 2 - l` of a
/// candidate solution `w` over `grid`, with derivatives from central
/// differences.
pub fn ode_residual(
    ode: &PricingOde,
    payoff: impl Fn(f64) -> f64,
    w: impl Fn(f64) -> f64,
    grid: &[f64],
) -> Result<f64> {
    positive("rel_step", ode.rel_step)?;
    let mut worst = 0.0f64;
    for &x in grid {
        positive("grid point", x)?;
        let h = ode.rel_step * x;
        let (lo, hi) = (x - h, x + h);
        if let Some(kink) = ode.kink {
            if lo <= kink && kink <= hi {
                return Err(PricingError::StencilCrossesKink { x, lo, hi, kink });
            }
        }
        let (w_lo, w_mid, w_hi) = (w(lo), w(x), w(hi));
        let d1 = (w_hi - w_lo) / (2.0 * h);
        let d2 = (w_hi - 2.0 * w_mid + w_lo) / (h * h);
        let residual =
            ode.rho * w_mid - ode.drift * x * d1 - 0.5 * ode.sigma_sq * x * x * d2 - payoff(x);
        worst = worst.max(residual.abs());
    }
    Ok(worst)
}

/// `n` log-spaced points on `[lo, hi]` with no point within `half_width` of
/// `center` when an exclusion window is given. Points are split between the
/// two sides in proportion to their log-length.
pub fn log_grid(lo: f64, hi: f64, n: usize, exclude: Option<(f64, f64)>) -> Result<Vec<f64>> {
    positive("lo", lo)?;
    if !(hi > lo) {
        return Err(PricingError::invalid("hi", hi, "must exceed lo"));
    }
    let segment = |a: f64, b: f64, m: usize| -> Vec<f64> {
        match m {
            0 => vec![],
            1 => vec![a],
            _ => {
                let step = (b / a).ln() / (m - 1) as f64;
                (0..m).map(|i| a * (step * i as f64).exp()).collect()
            }
        }
    };
    match exclude {
        Some((center, half)) if center - half > lo && center + half < hi => {
            let (left_hi, right_lo) = (center - half, center + half);
            let left_len = (left_hi / lo).ln();
            let total = left_len + (hi / right_lo).ln();
            let left_n = ((n as f64) * left_len / total).round() as usize;
            let mut pts = segment(lo, left_hi, left_n);
            pts.extend(segment(right_lo, hi, n - left_n));
            Ok(pts)
        }
        Some((center, half)) if center + half >= lo && center - half <= hi => {
            Err(PricingError::invalid(
                "exclusion window",
                center,
                "window must lie strictly inside the grid range",
            ))
        }
        _ => Ok(segment(lo, hi, n)),
    }
}
