//! Discrete-time perpetual futures: closed forms under constant parameters,
//! equalizing interest factors, funding cash flows, the mark-value
//! adjustment, and a certified truncated-series oracle for deterministic
//! rate and funding schedules.
//!
//! Rates here are simple per-period returns and `kappa`, `iota` are
//! per-period funding coefficients.

use rand_distr::StandardNormal;
use rand::Rng;
use serde::Serialize;

use crate::error::{positive, PricingError, Result};
use crate::mc::{geometric_periods, simulate, McConfig};
use crate::model::{
    FundingConvention, FundingSpec, GbmModel, PriceQuote, QuoteSource, RateEnvironment, TimeMode,
};

/// Linear or inverse perpetual futures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FuturesKind {
    Linear,
    Inverse,
}

pub const LINEAR_INTEGRABILITY: &str = "(1 + r_a) / ((1 + kappa) (1 + r_b)) < 1";
pub const INVERSE_INTEGRABILITY: &str = "(1 + r_b) / ((1 + kappa) (1 + r_a)) < 1";

/// Longest horizon the series oracle will sum before giving up.
pub const MAX_HORIZON: usize = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtPriceInputs {
    pub env: RateEnvironment,
    pub funding: FundingSpec,
    pub spot: f64,
}

impl DtPriceInputs {
    pub fn new(env: RateEnvironment, funding: FundingSpec, spot: f64) -> Result<Self> {
        env.require(TimeMode::DiscreteTime)?;
        positive("spot", spot)?;
        Ok(DtPriceInputs { env, funding, spot })
    }

    /// `(iota, kappa)` as they enter the predictable-funding formulas.
    fn effective_funding(&self) -> Result<(f64, f64)> {
        effective_funding(&self.env, &self.funding)
    }
}

fn effective_funding(env: &RateEnvironment, funding: &FundingSpec) -> Result<(f64, f64)> {
    match funding.convention() {
        FundingConvention::Predictable => Ok((funding.iota(), funding.kappa())),
        FundingConvention::MarkValue => mark_value_adjust(env, funding.iota(), funding.kappa()),
    }
}

/// Ratio of consecutive terms of the linear pricing series.
fn linear_ratio(env: &RateEnvironment, kappa: f64) -> f64 {
    (1.0 + env.r_a()) / ((1.0 + kappa) * (1.0 + env.r_b()))
}

fn inverse_ratio(env: &RateEnvironment, kappa: f64) -> f64 {
    (1.0 + env.r_b()) / ((1.0 + kappa) * (1.0 + env.r_a()))
}

/// Linear perpetual futures price with constant rates and funding.
pub fn dt_linear_price(inputs: &DtPriceInputs) -> Result<PriceQuote> {
    let (iota, kappa) = inputs.effective_funding()?;
    let env = &inputs.env;
    if !(linear_ratio(env, kappa) < 1.0) {
        return Err(PricingError::DivergentPrice {
            condition: LINEAR_INTEGRABILITY,
        });
    }
    if !(iota < kappa) {
        return Err(PricingError::NonPositivePrice {
            condition: "iota < kappa",
        });
    }
    let (r_a, r_b) = (env.r_a(), env.r_b());
    let f = inputs.spot * (kappa - iota) * (1.0 + r_b) / (r_b - r_a + kappa * (1.0 + r_b));
    Ok(PriceQuote::closed_form(f))
}

/// Inverse perpetual futures price, quoted in units of `a`, with constant
/// rates and funding.
pub fn dt_inverse_price(inputs: &DtPriceInputs) -> Result<PriceQuote> {
    let (iota, kappa) = inputs.effective_funding()?;
    let env = &inputs.env;
    if !(inverse_ratio(env, kappa) < 1.0) {
        return Err(PricingError::DivergentPrice {
            condition: INVERSE_INTEGRABILITY,
        });
    }
    if !(iota < kappa) {
        return Err(PricingError::NonPositivePrice {
            condition: "iota < kappa",
        });
    }
    let (r_a, r_b) = (env.r_a(), env.r_b());
    let f = inputs.spot * (r_a - r_b + kappa * (1.0 + r_a)) / ((kappa - iota) * (1.0 + r_a));
    Ok(PriceQuote::closed_form(f))
}

pub fn dt_price(kind: FuturesKind, inputs: &DtPriceInputs) -> Result<PriceQuote> {
    match kind {
        FuturesKind::Linear => dt_linear_price(inputs),
        FuturesKind::Inverse => dt_inverse_price(inputs),
    }
}

/// Interest factor that makes the perpetual price equal to the spot.
pub fn dt_equalizing_iota(env: &RateEnvironment, kind: FuturesKind, kappa: f64) -> Result<f64> {
    env.require(TimeMode::DiscreteTime)?;
    positive("kappa", kappa)?;
    let (r_a, r_b) = (env.r_a(), env.r_b());
    let iota = match kind {
        FuturesKind::Linear => (r_a - r_b) / (1.0 + r_b),
        FuturesKind::Inverse => (r_b - r_a) / (1.0 + r_a),
    };
    if iota >= kappa {
        return Err(PricingError::PremiumTooSmall { iota, kappa });
    }
    Ok(iota)
}

/// Funding leg paid to a long position at the end of a period in which the
/// futures price was `f` and the spot `x`, excluding the mark-to-market
/// variation. Linear amounts are in `a`; inverse amounts are in `b` and
/// computed on `1/f` and `1/x`.
pub fn dt_funding_cashflow(kind: FuturesKind, f: f64, x: f64, funding: &FundingSpec) -> Result<f64> {
    positive("futures price", f)?;
    positive("spot", x)?;
    let (kappa, iota) = (funding.kappa(), funding.iota());
    Ok(match kind {
        FuturesKind::Linear => -kappa * (f - x) - iota * x,
        FuturesKind::Inverse => -kappa * (1.0 / f - 1.0 / x) - iota / x,
    })
}

/// Converts mark-value funding coefficients into the equivalent predictable
/// ones by scaling with `(1 + r_a) / (1 + r_b)`. Returns `(iota, kappa)`.
pub fn mark_value_adjust(env: &RateEnvironment, hat_iota: f64, hat_kappa: f64) -> Result<(f64, f64)> {
    env.require(TimeMode::DiscreteTime)?;
    positive("hat_kappa", hat_kappa)?;
    let g = (1.0 + env.r_a()) / (1.0 + env.r_b());
    Ok((g * hat_iota, g * hat_kappa))
}

/// Piecewise-constant deterministic schedule indexed by period.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstant {
    starts: Vec<usize>,
    values: Vec<f64>,
}

impl PiecewiseConstant {
    pub fn constant(value: f64) -> Self {
        PiecewiseConstant {
            starts: vec![0],
            values: vec![value],
        }
    }

    /// Segments `(first period, value)`; the first must start at period 0
    /// and starts must increase. The last value holds forever.
    pub fn new(segments: Vec<(usize, f64)>) -> Result<Self> {
        if segments.first().map(|s| s.0) != Some(0) {
            return Err(PricingError::MissingInput("a schedule segment starting at period 0"));
        }
        if segments.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(PricingError::invalid(
                "schedule start",
                f64::NAN,
                "segment starts must strictly increase",
            ));
        }
        let (starts, values) = segments.into_iter().unzip();
        Ok(PiecewiseConstant { starts, values })
    }

    pub fn at(&self, period: usize) -> f64 {
        let idx = self.starts.partition_point(|&s| s <= period) - 1;
        self.values[idx]
    }

    /// Period from which the schedule is constant.
    pub fn last_change(&self) -> usize {
        *self.starts.last().expect("schedules are non-empty")
    }

    fn terminal(&self) -> f64 {
        *self.values.last().expect("schedules are non-empty")
    }
}

/// Deterministic per-period rates and funding coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct DtSchedule {
    pub r_a: PiecewiseConstant,
    pub r_b: PiecewiseConstant,
    pub kappa: PiecewiseConstant,
    pub iota: PiecewiseConstant,
}

impl DtSchedule {
    pub fn new(
        r_a: PiecewiseConstant,
        r_b: PiecewiseConstant,
        kappa: PiecewiseConstant,
        iota: PiecewiseConstant,
    ) -> Result<Self> {
        for &r in r_a.values.iter().chain(&r_b.values) {
            if !(r > -1.0 && r.is_finite()) {
                return Err(PricingError::invalid("rate", r, "per-period rate must exceed -1"));
            }
        }
        for &k in &kappa.values {
            positive("kappa", k)?;
        }
        Ok(DtSchedule {
            r_a,
            r_b,
            kappa,
            iota,
        })
    }

    /// Constant schedule from an environment and (predictable) funding.
    pub fn constant(env: &RateEnvironment, funding: &FundingSpec) -> Result<Self> {
        env.require(TimeMode::DiscreteTime)?;
        let (iota, kappa) = effective_funding(env, funding)?;
        Self::new(
            PiecewiseConstant::constant(env.r_a()),
            PiecewiseConstant::constant(env.r_b()),
            PiecewiseConstant::constant(kappa),
            PiecewiseConstant::constant(iota),
        )
    }

    fn last_change(&self) -> usize {
        [&self.r_a, &self.r_b, &self.kappa, &self.iota]
            .iter()
            .map(|s| s.last_change())
            .max()
            .unwrap_or(0)
    }

    /// One-period growth of the expected underlying under the contract's
    /// pricing measure: `x` under the a-measure for linear contracts, `1/x`
    /// under the b-measure for inverse ones.
    fn growth(&self, kind: FuturesKind, period: usize) -> f64 {
        let (ra, rb) = (self.r_a.at(period), self.r_b.at(period));
        match kind {
            FuturesKind::Linear => (1.0 + ra) / (1.0 + rb),
            FuturesKind::Inverse => (1.0 + rb) / (1.0 + ra),
        }
    }
}

/// Evaluates the pricing series
/// `sum_s prod_{u<=s} 1/(1+kappa_u) (kappa_s - iota_s) E[x_s]`
/// (or its inverse counterpart on `1/x`) up to a horizon where the geometric
/// tail is certified below `tol`. `horizon = None` picks the shortest such
/// horizon.
///
/// For inverse contracts the series yields `1/f`; the quote holds `f` and a
/// tail bound translated to price units.
pub fn dt_series_price(
    schedule: &DtSchedule,
    kind: FuturesKind,
    x0: f64,
    horizon: Option<usize>,
    tol: f64,
) -> Result<PriceQuote> {
    positive("x0", x0)?;
    positive("tol", tol)?;
    let last = schedule.last_change();
    let terminal_kappa = schedule.kappa.terminal();
    let terminal_weight = terminal_kappa - schedule.iota.terminal();
    let psi = schedule.growth(kind, last) / (1.0 + terminal_kappa);
    if terminal_weight != 0.0 && !(psi < 1.0) {
        return Err(PricingError::DivergentPrice {
            condition: match kind {
                FuturesKind::Linear => LINEAR_INTEGRABILITY,
                FuturesKind::Inverse => INVERSE_INTEGRABILITY,
            },
        });
    }
    if let Some(t) = horizon {
        if t < last {
            return Err(PricingError::HorizonTooShort {
                horizon: t,
                tail_bound: f64::INFINITY,
                tol,
            });
        }
    }

    let mut expected = match kind {
        FuturesKind::Linear => x0,
        FuturesKind::Inverse => 1.0 / x0,
    };
    let mut discount = 1.0;
    let mut sum = 0.0;
    let mut sigma = 0usize;
    let tail = loop {
        let kappa = schedule.kappa.at(sigma);
        discount /= 1.0 + kappa;
        let term = discount * (kappa - schedule.iota.at(sigma)) * expected;
        sum += term;
        if sigma >= last {
            let tail = if terminal_weight == 0.0 {
                0.0
            } else {
                term.abs() * psi / (1.0 - psi)
            };
            match horizon {
                Some(t) if sigma == t => {
                    if tail > tol {
                        return Err(PricingError::HorizonTooShort {
                            horizon: t,
                            tail_bound: tail,
                            tol,
                        });
                    }
                    break tail;
                }
                None if tail < tol => break tail,
                _ => {}
            }
        }
        if sigma >= MAX_HORIZON {
            return Err(PricingError::HorizonTooShort {
                horizon: sigma,
                tail_bound: f64::INFINITY,
                tol,
            });
        }
        expected *= schedule.growth(kind, sigma);
        sigma += 1;
    };

    let (value, tail_bound) = match kind {
        FuturesKind::Linear => (sum, tail),
        FuturesKind::Inverse => {
            let s = sum.abs();
            let bound = if s > tail {
                tail / (s * (s - tail))
            } else {
                f64::INFINITY
            };
            (1.0 / sum, bound)
        }
    };
    Ok(PriceQuote {
        value,
        source: QuoteSource::Series {
            horizon: sigma,
            tail_bound,
        },
    })
}

/// Series oracle for constant parameters; see [`dt_series_price`].
pub fn dt_truncated_sum_oracle(
    env: &RateEnvironment,
    funding: &FundingSpec,
    kind: FuturesKind,
    x0: f64,
    horizon: Option<usize>,
    tol: f64,
) -> Result<PriceQuote> {
    let schedule = DtSchedule::constant(env, funding)?;
    dt_series_price(&schedule, kind, x0, horizon, tol)
}

/// Monte Carlo estimate of the linear price as the expected spot at a
/// geometric random maturity with mean `1/kappa`.
///
/// The spot follows a lognormal walk whose per-period growth has mean
/// `(1 + r_a) / (1 + r_b)` and log-variance `|sigma_x|^2 * delta`.
pub fn dt_random_maturity_price(
    env: &RateEnvironment,
    funding: &FundingSpec,
    model: &GbmModel,
    cfg: &McConfig,
) -> Result<PriceQuote> {
    env.require(TimeMode::DiscreteTime)?;
    cfg.validate()?;
    let (iota, kappa) = effective_funding(env, funding)?;
    if iota != 0.0 {
        return Err(PricingError::UnsupportedRepresentation(
            "geometric-maturity sampling needs iota = 0; use the closed-form pricers",
        ));
    }
    if !(linear_ratio(env, kappa) < 1.0) {
        return Err(PricingError::DivergentPrice {
            condition: LINEAR_INTEGRABILITY,
        });
    }
    let log_growth = ((1.0 + env.r_a()) / (1.0 + env.r_b())).ln();
    let var = model.sigma_x_norm_sq() * funding.delta();
    let vol = var.sqrt();
    let x0 = model.x0();
    let antithetic = cfg.antithetic;
    let units = if antithetic {
        cfg.n_samples.div_ceil(2)
    } else {
        cfg.n_samples
    };
    let acc = simulate(units, cfg.seed, |rng, _| {
        let n = geometric_periods(rng, kappa) as f64;
        let z: f64 = rng.sample(StandardNormal);
        let drift = (log_growth - 0.5 * var) * n;
        let shock = vol * n.sqrt() * z;
        let up = x0 * (drift + shock).exp();
        if antithetic {
            0.5 * (up + x0 * (drift - shock).exp())
        } else {
            up
        }
    });
    let est = acc.estimate();
    Ok(PriceQuote {
        value: est.mean,
        source: QuoteSource::MonteCarlo {
            std_error: est.std_error,
            n: est.n,
        },
    })
}
