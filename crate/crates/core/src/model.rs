//! Market primitives shared by every pricer: rate environments, funding
//! specifications, the lognormal exchange-rate model, contract descriptors
//! and the density linking the two currency pricing measures.
//!
//! Everything here is immutable once constructed. Constructors validate their
//! invariants so that pricers only need to check the contract-specific
//! conditions (integrability, positivity).

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{finite, positive, PricingError, Result};

/// Funding period of eight hours in years (three periods a day, 360 days).
pub const EIGHT_HOURS: f64 = 1.0 / 1080.0;

/// Compounding convention of a rate environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TimeMode {
    /// Rates are simple returns per funding period.
    DiscreteTime,
    /// Rates are continuously compounded annual rates.
    ContinuousTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Currency {
    /// Quote currency, the unit of account of linear contracts.
    A,
    /// Base currency, margin currency of inverse and quanto contracts.
    B,
    /// Third currency referenced by quanto contracts.
    C,
}

/// Riskless rates of the currencies involved in a contract.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEnvironment {
    r_a: f64,
    r_b: f64,
    r_c: Option<f64>,
    mode: TimeMode,
}

impl RateEnvironment {
    /// Per-period simple rates. Each rate must exceed -1.
    pub fn discrete(r_a: f64, r_b: f64) -> Result<Self> {
        Self::new(r_a, r_b, TimeMode::DiscreteTime)
    }

    /// Continuously compounded annual rates.
    pub fn continuous(r_a: f64, r_b: f64) -> Result<Self> {
        Self::new(r_a, r_b, TimeMode::ContinuousTime)
    }

    pub fn new(r_a: f64, r_b: f64, mode: TimeMode) -> Result<Self> {
        let env = RateEnvironment {
            r_a: check_rate("r_a", r_a, mode)?,
            r_b: check_rate("r_b", r_b, mode)?,
            r_c: None,
            mode,
        };
        Ok(env)
    }

    /// Adds the rate of the third (quanto) currency.
    pub fn with_r_c(mut self, r_c: f64) -> Result<Self> {
        self.r_c = Some(check_rate("r_c", r_c, self.mode)?);
        Ok(self)
    }

    pub fn r_a(&self) -> f64 {
        self.r_a
    }

    pub fn r_b(&self) -> f64 {
        self.r_b
    }

    pub fn r_c(&self) -> Option<f64> {
        self.r_c
    }

    pub fn mode(&self) -> TimeMode {
        self.mode
    }

    /// Interest spread `r_a - r_b`.
    pub fn spread(&self) -> f64 {
        self.r_a - self.r_b
    }

    pub fn require_r_c(&self) -> Result<f64> {
        self.r_c.ok_or(PricingError::MissingInput("r_c (third currency rate)"))
    }

    /// Fails unless the environment uses `expected` compounding.
    pub fn require(&self, expected: TimeMode) -> Result<()> {
        if self.mode == expected {
            Ok(())
        } else {
            Err(PricingError::ModeMismatch {
                expected,
                found: self.mode,
            })
        }
    }

    pub fn rate(&self, currency: Currency) -> Result<f64> {
        match currency {
            Currency::A => Ok(self.r_a),
            Currency::B => Ok(self.r_b),
            Currency::C => self.require_r_c(),
        }
    }

    /// Value at `t` of one unit invested at time zero in the riskless asset
    /// of `currency`. In discrete mode `t` counts funding periods.
    pub fn bank_account(&self, currency: Currency, t: f64) -> Result<f64> {
        let r = self.rate(currency)?;
        Ok(match self.mode {
            TimeMode::DiscreteTime => (1.0 + r).powf(t),
            TimeMode::ContinuousTime => (r * t).exp(),
        })
    }
}

fn check_rate(name: &'static str, r: f64, mode: TimeMode) -> Result<f64> {
    finite(name, r)?;
    if mode == TimeMode::DiscreteTime && r <= -1.0 {
        return Err(PricingError::invalid(name, r, "per-period rate must exceed -1"));
    }
    Ok(r)
}

/// Radon-Nikodym density of the b-measure with respect to the a-measure on
/// information up to `t`: `(B_b(t) / B_a(t)) * (x_t / x_0)`.
pub fn density_ratio(env: &RateEnvironment, x0: f64, x_t: f64, t: f64) -> Result<f64> {
    positive("x0", x0)?;
    positive("x_t", x_t)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(PricingError::invalid("t", t, "must be non-negative"));
    }
    let carry = env.bank_account(Currency::B, t)? / env.bank_account(Currency::A, t)?;
    Ok(carry * x_t / x0)
}

/// When the funding amount is known: at the start of the period, or only at
/// its end through the mark value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum FundingConvention {
    #[default]
    Predictable,
    MarkValue,
}

/// Exchange-set funding parameters of a perpetual contract.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FundingSpec {
    kappa: f64,
    iota: f64,
    delta: f64,
    convention: FundingConvention,
}

impl FundingSpec {
    /// Predictable funding with premium rate `kappa` and interest factor
    /// `iota`, paid every eight hours.
    pub fn new(kappa: f64, iota: f64) -> Result<Self> {
        Ok(FundingSpec {
            kappa: positive("kappa", kappa)?,
            iota: finite("iota", iota)?,
            delta: EIGHT_HOURS,
            convention: FundingConvention::Predictable,
        })
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        self.delta = positive("delta", delta)?;
        Ok(self)
    }

    pub fn with_convention(mut self, convention: FundingConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn iota(&self) -> f64 {
        self.iota
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn convention(&self) -> FundingConvention {
        self.convention
    }

    /// `iota < kappa`, required for a positive price.
    pub fn require_positive_premium(&self) -> Result<()> {
        if self.iota < self.kappa {
            Ok(())
        } else {
            Err(PricingError::NonPositivePrice {
                condition: "iota < kappa",
            })
        }
    }
}

/// Multi-factor lognormal dynamics of the b/a rate `x` and, for quanto
/// contracts, the c/a rate `z`, driven by a common Brownian motion.
///
/// Drifts are not stored. Under the a-measure `x` drifts at `r_a - r_b` and
/// `z` at `r_a - r_c`; the measure change to the b-measure adds
/// `sigma_x . sigma_z` to the drift of `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct GbmModel {
    x0: f64,
    z0: Option<f64>,
    sigma_x: Vec<f64>,
    sigma_z: Option<Vec<f64>>,
}

impl GbmModel {
    pub fn new(x0: f64, sigma_x: Vec<f64>) -> Result<Self> {
        positive("x0", x0)?;
        if sigma_x.is_empty() {
            return Err(PricingError::MissingInput("sigma_x must have dimension >= 1"));
        }
        for &s in &sigma_x {
            finite("sigma_x", s)?;
        }
        Ok(GbmModel {
            x0,
            z0: None,
            sigma_x,
            sigma_z: None,
        })
    }

    /// One-factor model with scalar volatility.
    pub fn scalar(x0: f64, sigma: f64) -> Result<Self> {
        Self::new(x0, vec![sigma])
    }

    /// Adds the third exchange rate used by quanto contracts.
    pub fn with_quanto(mut self, z0: f64, sigma_z: Vec<f64>) -> Result<Self> {
        positive("z0", z0)?;
        if sigma_z.len() != self.sigma_x.len() {
            return Err(PricingError::invalid(
                "sigma_z dimension",
                sigma_z.len() as f64,
                "must match sigma_x",
            ));
        }
        for &s in &sigma_z {
            finite("sigma_z", s)?;
        }
        self.z0 = Some(z0);
        self.sigma_z = Some(sigma_z);
        Ok(self)
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn z0(&self) -> Option<f64> {
        self.z0
    }

    pub fn sigma_x(&self) -> &[f64] {
        &self.sigma_x
    }

    pub fn sigma_z(&self) -> Option<&[f64]> {
        self.sigma_z.as_deref()
    }

    pub fn dimension(&self) -> usize {
        self.sigma_x.len()
    }

    pub fn sigma_x_norm_sq(&self) -> f64 {
        dot(&self.sigma_x, &self.sigma_x)
    }

    /// `sigma_x . sigma_z`, the covariance rate of the two log rates.
    pub fn cross_vol(&self) -> Option<f64> {
        self.sigma_z.as_ref().map(|sz| dot(&self.sigma_x, sz))
    }

    pub fn require_quanto(&self) -> Result<(f64, &[f64])> {
        match (self.z0, self.sigma_z.as_deref()) {
            (Some(z0), Some(sz)) => Ok((z0, sz)),
            _ => Err(PricingError::MissingInput("z0 and sigma_z (quanto model)")),
        }
    }

    pub fn x_drift_a(&self, env: &RateEnvironment) -> f64 {
        env.spread()
    }

    /// Drift of `x` under the b-measure.
    pub fn x_drift_b(&self, env: &RateEnvironment) -> f64 {
        env.spread() + self.sigma_x_norm_sq()
    }

    /// Drift of `1/x` under the b-measure.
    pub fn x_star_drift_b(&self, env: &RateEnvironment) -> f64 {
        -env.spread()
    }

    pub fn z_drift_a(&self, env: &RateEnvironment) -> Result<f64> {
        Ok(env.r_a() - env.require_r_c()?)
    }

    pub fn z_drift_b(&self, env: &RateEnvironment) -> Result<f64> {
        self.require_quanto()?;
        let cross = self.cross_vol().unwrap_or(0.0);
        Ok(env.r_a() - env.require_r_c()? + cross)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Family of perpetual contracts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ContractKind {
    Linear,
    Inverse,
    Quanto,
    EverlastingOption,
}

impl ContractKind {
    pub fn tag(self) -> &'static str {
        match self {
            ContractKind::Linear => "linear",
            ContractKind::Inverse => "inverse",
            ContractKind::Quanto => "quanto",
            ContractKind::EverlastingOption => "everlasting",
        }
    }
}

impl fmt::Display for ContractKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for ContractKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(ContractKind::Linear),
            "inverse" => Ok(ContractKind::Inverse),
            "quanto" => Ok(ContractKind::Quanto),
            "everlasting" | "everlasting-option" => Ok(ContractKind::EverlastingOption),
            other => Err(format!("unknown contract kind `{other}`")),
        }
    }
}

/// Twice differentiable target function of the spot.
pub trait SmoothPayoff: Send + Sync + fmt::Debug {
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
    fn second_derivative(&self, x: f64) -> f64;
}

/// `phi(x) = x`.
#[derive(Debug, Clone, Copy)]
pub struct Identity;

impl SmoothPayoff for Identity {
    fn value(&self, x: f64) -> f64 {
        x
    }
    fn derivative(&self, _x: f64) -> f64 {
        1.0
    }
    fn second_derivative(&self, _x: f64) -> f64 {
        0.0
    }
}

/// `phi(x) = x^p`.
#[derive(Debug, Clone, Copy)]
pub struct Power(pub f64);

impl SmoothPayoff for Power {
    fn value(&self, x: f64) -> f64 {
        x.powf(self.0)
    }
    fn derivative(&self, x: f64) -> f64 {
        self.0 * x.powf(self.0 - 1.0)
    }
    fn second_derivative(&self, x: f64) -> f64 {
        self.0 * (self.0 - 1.0) * x.powf(self.0 - 2.0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Constant(pub f64);

impl SmoothPayoff for Constant {
    fn value(&self, _x: f64) -> f64 {
        self.0
    }
    fn derivative(&self, _x: f64) -> f64 {
        0.0
    }
    fn second_derivative(&self, _x: f64) -> f64 {
        0.0
    }
}

/// Payoff tracked by an everlasting option.
#[derive(Debug, Clone)]
pub enum Payoff {
    Call { strike: f64 },
    Put { strike: f64 },
    Smooth(Arc<dyn SmoothPayoff>),
}

impl Payoff {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Payoff::Call { strike } => (x - strike).max(0.0),
            Payoff::Put { strike } => (strike - x).max(0.0),
            Payoff::Smooth(phi) => phi.value(x),
        }
    }
}

/// What a perpetual contract pays and how it is funded.
#[derive(Debug, Clone)]
pub struct ContractSpec {
    kind: ContractKind,
    funding: FundingSpec,
    payoff: Option<Payoff>,
    conversion_rate: Option<f64>,
}

impl ContractSpec {
    pub fn new(kind: ContractKind, funding: FundingSpec, payoff: Option<Payoff>) -> Result<Self> {
        if kind == ContractKind::EverlastingOption && payoff.is_none() {
            return Err(PricingError::MissingInput("payoff for an everlasting option"));
        }
        if let Some(Payoff::Call { strike } | Payoff::Put { strike }) = payoff {
            positive("strike", strike)?;
        }
        Ok(ContractSpec {
            kind,
            funding,
            payoff,
            conversion_rate: None,
        })
    }

    pub fn linear(funding: FundingSpec) -> Self {
        Self::new(ContractKind::Linear, funding, None).expect("linear contracts have no payoff")
    }

    pub fn inverse(funding: FundingSpec) -> Self {
        Self::new(ContractKind::Inverse, funding, None).expect("inverse contracts have no payoff")
    }

    pub fn quanto(funding: FundingSpec) -> Self {
        Self::new(ContractKind::Quanto, funding, None).expect("quanto contracts have no payoff")
    }

    pub fn everlasting(funding: FundingSpec, payoff: Payoff) -> Result<Self> {
        Self::new(ContractKind::EverlastingOption, funding, Some(payoff))
    }

    /// Fixed a/b conversion rate of a quanto contract. It scales every cash
    /// flow of the contract and therefore never enters the price.
    pub fn with_conversion_rate(mut self, chi: f64) -> Result<Self> {
        self.conversion_rate = Some(positive("conversion rate", chi)?);
        Ok(self)
    }

    pub fn kind(&self) -> ContractKind {
        self.kind
    }

    pub fn funding(&self) -> &FundingSpec {
        &self.funding
    }

    pub fn payoff(&self) -> Option<&Payoff> {
        self.payoff.as_ref()
    }

    pub fn conversion_rate(&self) -> Option<f64> {
        self.conversion_rate
    }

    /// Checks that `model` carries what this contract needs.
    pub fn check_model(&self, model: &GbmModel) -> Result<()> {
        if self.kind == ContractKind::Quanto {
            model.require_quanto()?;
        }
        Ok(())
    }
}

/// How a price was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum QuoteSource {
    ClosedForm,
    /// Truncated series with a certified bound on the neglected tail.
    Series { horizon: usize, tail_bound: f64 },
    MonteCarlo { std_error: f64, n: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PriceQuote {
    pub value: f64,
    #[serde(flatten)]
    pub source: QuoteSource,
}

impl PriceQuote {
    pub fn closed_form(value: f64) -> Self {
        PriceQuote {
            value,
            source: QuoteSource::ClosedForm,
        }
    }

    pub fn std_error(&self) -> Option<f64> {
        match self.source {
            QuoteSource::MonteCarlo { std_error, .. } => Some(std_error),
            _ => None,
        }
    }

    pub fn tail_bound(&self) -> Option<f64> {
        match self.source {
            QuoteSource::Series { tail_bound, .. } => Some(tail_bound),
            _ => None,
        }
    }

    /// Relative basis `f / x - 1`.
    pub fn basis(&self, spot: f64) -> f64 {
        self.value / spot - 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_is_one_with_equal_rates_and_unchanged_spot() {
        let env = RateEnvironment::continuous(0.0, 0.0).unwrap();
        assert_eq!(density_ratio(&env, 1.3, 1.3, 5.0).unwrap(), 1.0);
        let env = RateEnvironment::discrete(0.0, 0.0).unwrap();
        assert_eq!(density_ratio(&env, 1.3, 1.3, 5.0).unwrap(), 1.0);
    }

    #[test]
    fn density_carries_rate_spread() {
        let env = RateEnvironment::continuous(0.03, 0.01).unwrap();
        let d = density_ratio(&env, 2.0, 2.0, 1.0).unwrap();
        assert!((d - (-0.02f64).exp()).abs() < 1e-15);
        assert!((d - 0.980199).abs() < 1e-6);

        let env = RateEnvironment::discrete(0.05, 0.01).unwrap();
        let d = density_ratio(&env, 1.0, 1.1, 2.0).unwrap();
        let expected = (1.01f64 / 1.05).powi(2) * 1.1;
        assert!((d - expected).abs() < 1e-15);
    }

    #[test]
    fn density_rejects_non_positive_spot() {
        let env = RateEnvironment::continuous(0.0, 0.0).unwrap();
        assert!(matches!(
            density_ratio(&env, 1.0, 0.0, 1.0),
            Err(PricingError::InvalidParameter { .. })
        ));
        assert!(density_ratio(&env, -1.0, 1.0, 1.0).is_err());
        assert!(density_ratio(&env, 1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn discrete_rates_must_exceed_minus_one() {
        assert!(RateEnvironment::discrete(-1.0, 0.0).is_err());
        assert!(RateEnvironment::discrete(0.0, -1.5).is_err());
        assert!(RateEnvironment::discrete(0.0, 0.0).unwrap().with_r_c(-1.0).is_err());
        // continuous rates are unrestricted
        assert!(RateEnvironment::continuous(-1.5, 0.0).is_ok());
    }

    #[test]
    fn mode_guard() {
        let env = RateEnvironment::continuous(0.01, 0.0).unwrap();
        assert!(env.require(TimeMode::ContinuousTime).is_ok());
        assert_eq!(
            env.require(TimeMode::DiscreteTime),
            Err(PricingError::ModeMismatch {
                expected: TimeMode::DiscreteTime,
                found: TimeMode::ContinuousTime
            })
        );
    }

    #[test]
    fn funding_spec_validation() {
        assert!(FundingSpec::new(0.0, 0.0).is_err());
        assert!(FundingSpec::new(-0.1, 0.0).is_err());
        assert!(FundingSpec::new(0.1, f64::NAN).is_err());
        let f = FundingSpec::new(0.1, 0.2).unwrap();
        assert!(f.require_positive_premium().is_err());
        assert_eq!(f.delta(), EIGHT_HOURS);
        assert!(f.with_delta(0.0).is_err());
    }

    #[test]
    fn gbm_dimensions_and_drifts() {
        assert!(GbmModel::new(1.0, vec![]).is_err());
        assert!(GbmModel::new(0.0, vec![0.1]).is_err());
        let m = GbmModel::new(1.0, vec![0.2, 0.1]).unwrap();
        assert!(m.clone().with_quanto(1.0, vec![0.1]).is_err());
        let m = m.with_quanto(1.0, vec![0.1, 0.2]).unwrap();
        assert!((m.cross_vol().unwrap() - 0.04).abs() < 1e-15);
        assert!((m.sigma_x_norm_sq() - 0.05).abs() < 1e-15);

        let env = RateEnvironment::continuous(0.03, 0.01).unwrap().with_r_c(0.02).unwrap();
        assert!((m.x_drift_a(&env) - 0.02).abs() < 1e-15);
        assert!((m.x_star_drift_b(&env) + 0.02).abs() < 1e-15);
        assert!((m.z_drift_a(&env).unwrap() - 0.01).abs() < 1e-15);
        assert!((m.z_drift_b(&env).unwrap() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn contract_requirements() {
        let funding = FundingSpec::new(0.5, 0.0).unwrap();
        assert!(ContractSpec::new(ContractKind::EverlastingOption, funding, None).is_err());
        assert!(ContractSpec::everlasting(funding, Payoff::Call { strike: 0.0 }).is_err());
        let q = ContractSpec::quanto(funding).with_conversion_rate(1e-4).unwrap();
        let plain = GbmModel::scalar(1.0, 0.2).unwrap();
        assert!(q.check_model(&plain).is_err());
        let full = plain.with_quanto(1.0, vec![0.3]).unwrap();
        assert!(q.check_model(&full).is_ok());
    }

    #[test]
    fn kind_tags_round_trip() {
        for kind in [
            ContractKind::Linear,
            ContractKind::Inverse,
            ContractKind::Quanto,
            ContractKind::EverlastingOption,
        ] {
            assert_eq!(kind.tag().parse::<ContractKind>().unwrap(), kind);
        }
        assert!("perp".parse::<ContractKind>().is_err());
    }
}
