//! Monte Carlo oracles for the random-maturity representations.
//!
//! Every price estimate samples the spot exactly at an exponential (or, in
//! discrete time, geometric) maturity in one lognormal step, so estimates
//! carry no discretization bias. Work is split into fixed-size chunks, each
//! driven by its own ChaCha stream of the user seed, and chunk accumulators
//! are merged in chunk order. Results therefore depend only on the seed and
//! the sample count, not on how many rayon workers ran them.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{positive, PricingError, Result};
use crate::everlasting::{expected_call_payoff, expected_put_payoff};
use crate::model::{
    dot, ContractKind, ContractSpec, Currency, GbmModel, Payoff, RateEnvironment, TimeMode,
};

/// Number of sampling units per RNG stream.
pub const CHUNK_SIZE: u64 = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub n_samples: u64,
    pub seed: u64,
    /// Resolution of path-based checks.
    pub n_steps_per_year: u32,
    /// Pair every Gaussian draw with its negation.
    pub antithetic: bool,
}

impl McConfig {
    pub fn new(n_samples: u64, seed: u64) -> Self {
        McConfig {
            n_samples,
            seed,
            n_steps_per_year: 252,
            antithetic: false,
        }
    }

    pub fn with_antithetic(mut self, antithetic: bool) -> Self {
        self.antithetic = antithetic;
        self
    }

    pub fn with_steps_per_year(mut self, steps: u32) -> Self {
        self.n_steps_per_year = steps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 2 {
            return Err(PricingError::invalid(
                "n_samples",
                self.n_samples as f64,
                "need at least two samples for a standard error",
            ));
        }
        if self.n_steps_per_year == 0 {
            return Err(PricingError::invalid("n_steps_per_year", 0.0, "must be positive"));
        }
        Ok(())
    }

    /// Number of independent sampling units: antithetic pairs count once.
    fn units(&self) -> u64 {
        if self.antithetic {
            self.n_samples.div_ceil(2)
        } else {
            self.n_samples
        }
    }
}

/// Sample mean with its standard error `sd / sqrt(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    /// Number of independent samples behind the estimate.
    pub n: u64,
}

impl McEstimate {
    /// Whether `value` lies within `k` standard errors of the mean.
    pub fn brackets(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.std_error
    }

    /// Distance to `value` in standard errors.
    pub fn z_score(&self, value: f64) -> f64 {
        (self.mean - value) / self.std_error
    }
}

/// Running (sum, sum of squares, count) triple. Merging is associative.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accumulator {
    pub sum: f64,
    pub sum_sq: f64,
    pub count: u64,
}

impl Accumulator {
    pub fn push(&mut self, v: f64) {
        self.sum += v;
        self.sum_sq += v * v;
        self.count += 1;
    }

    pub fn merge(mut self, other: Accumulator) -> Accumulator {
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self.count += other.count;
        self
    }

    pub fn estimate(&self) -> McEstimate {
        let n = self.count as f64;
        let mean = self.sum / n;
        let var = if self.count > 1 {
            ((self.sum_sq - self.sum * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        McEstimate {
            mean,
            std_error: (var / n).sqrt(),
            n: self.count,
        }
    }
}

/// RNG for chunk `chunk` of the run seeded with `seed`.
pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Draws `n_units` values from `sampler` in parallel and accumulates them.
///
/// The sampler receives the chunk RNG and a scratch buffer it may reuse.
pub fn simulate<F>(n_units: u64, seed: u64, sampler: F) -> Accumulator
where
    F: Fn(&mut ChaCha8Rng, &mut Vec<f64>) -> f64 + Sync,
{
    let chunks = n_units.div_ceil(CHUNK_SIZE);
    let partials: Vec<Accumulator> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = chunk_rng(seed, chunk);
            let mut scratch = Vec::new();
            let len = CHUNK_SIZE.min(n_units - chunk * CHUNK_SIZE);
            let mut acc = Accumulator::default();
            for _ in 0..len {
                acc.push(sampler(&mut rng, &mut scratch));
            }
            acc
        })
        .collect();
    partials
        .into_iter()
        .fold(Accumulator::default(), Accumulator::merge)
}

/// Uniform draw on (0, 1].
fn open_uniform<R: Rng>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Exponential time with rate `kappa`, by inverse CDF.
pub fn exponential_time<R: Rng>(rng: &mut R, kappa: f64) -> f64 {
    -open_uniform(rng).ln() / kappa
}

/// Number of whole periods before maturity when each period ends the
/// contract with probability `kappa / (1 + kappa)`, by inverse CDF.
pub fn geometric_periods<R: Rng>(rng: &mut R, kappa: f64) -> u64 {
    let u = open_uniform(rng);
    (-u.ln() / kappa.ln_1p()).floor() as u64
}

/// `n` i.i.d. exponential maturities with mean `1/kappa`.
pub fn sample_exponential_maturity(kappa: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    positive("kappa", kappa)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| exponential_time(&mut rng, kappa)).collect())
}

/// `n` i.i.d. geometric maturities on {0, 1, ...} with mean `1/kappa`.
pub fn sample_geometric_maturity(kappa: f64, n: usize, seed: u64) -> Result<Vec<u64>> {
    positive("kappa", kappa)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| geometric_periods(&mut rng, kappa)).collect())
}

/// Fills `w` with a Brownian vector observed at time `tau`.
fn brownian<R: Rng>(rng: &mut R, dim: usize, tau: f64, w: &mut Vec<f64>) {
    let scale = tau.sqrt();
    w.clear();
    w.extend((0..dim).map(|_| scale * rng.sample::<f64, _>(StandardNormal)));
}

/// Log growth over `tau` of a lognormal rate with drift `drift` and
/// volatility vector `sigma` given the Brownian value `w`.
fn log_growth(drift: f64, sigma: &[f64], tau: f64, w: &[f64]) -> f64 {
    (drift - 0.5 * dot(sigma, sigma)) * tau + dot(sigma, w)
}

/// Samples of `ln(x_tau / x_0)` for a rate with the model's `sigma_x` and the
/// given drift, each drawn in one exact step.
pub fn sample_log_spot(model: &GbmModel, drift: f64, tau: f64, n: u64, seed: u64) -> Vec<f64> {
    let sigma = model.sigma_x();
    (0..n.div_ceil(CHUNK_SIZE))
        .into_par_iter()
        .flat_map_iter(|chunk| {
            let mut rng = chunk_rng(seed, chunk);
            let len = CHUNK_SIZE.min(n - chunk * CHUNK_SIZE);
            let mut w = Vec::new();
            (0..len)
                .map(|_| {
                    brownian(&mut rng, sigma.len(), tau, &mut w);
                    log_growth(drift, sigma, tau, &w)
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Applies `f` to the draw and, with antithetics, to its mirror image.
fn with_antithetic(antithetic: bool, w: &mut [f64], f: impl Fn(&[f64]) -> f64) -> f64 {
    if antithetic {
        let up = f(w);
        w.iter_mut().for_each(|v| *v = -*v);
        0.5 * (up + f(w))
    } else {
        f(w)
    }
}

/// Random-maturity estimate of a perpetual price with zero interest factor.
///
/// Linear contracts and everlasting options sample the spot (or payoff) at an
/// exponential maturity under the a-measure; quanto contracts sample `z`
/// under the b-measure. Inverse contracts estimate `E[1/x]` under the
/// b-measure and report its reciprocal with a delta-method standard error.
pub fn mc_price(
    contract: &ContractSpec,
    model: &GbmModel,
    env: &RateEnvironment,
    cfg: &McConfig,
) -> Result<McEstimate> {
    env.require(TimeMode::ContinuousTime)?;
    cfg.validate()?;
    contract.check_model(model)?;
    let funding = contract.funding();
    if funding.iota() != 0.0 {
        return Err(PricingError::UnsupportedRepresentation(
            "random-maturity sampling needs iota = 0; use the closed-form pricers",
        ));
    }
    let kappa = funding.kappa();
    let dim = model.dimension();
    let anti = cfg.antithetic;
    let sigma_x = model.sigma_x();

    let acc = match contract.kind() {
        ContractKind::Linear => {
            let (x0, mu) = (model.x0(), model.x_drift_a(env));
            simulate(cfg.units(), cfg.seed, |rng, w| {
                let tau = exponential_time(rng, kappa);
                brownian(rng, dim, tau, w);
                with_antithetic(anti, w, |w| x0 * log_growth(mu, sigma_x, tau, w).exp())
            })
        }
        ContractKind::Inverse => {
            let (x_star0, mu) = (1.0 / model.x0(), model.x_star_drift_b(env));
            let sigma_star: Vec<f64> = sigma_x.iter().map(|s| -s).collect();
            simulate(cfg.units(), cfg.seed, |rng, w| {
                let tau = exponential_time(rng, kappa);
                brownian(rng, dim, tau, w);
                with_antithetic(anti, w, |w| {
                    x_star0 * log_growth(mu, &sigma_star, tau, w).exp()
                })
            })
        }
        ContractKind::Quanto => {
            let (z0, sigma_z) = model.require_quanto()?;
            let mu = model.z_drift_b(env)?;
            simulate(cfg.units(), cfg.seed, |rng, w| {
                let tau = exponential_time(rng, kappa);
                brownian(rng, dim, tau, w);
                with_antithetic(anti, w, |w| z0 * log_growth(mu, sigma_z, tau, w).exp())
            })
        }
        ContractKind::EverlastingOption => {
            let payoff: &Payoff = contract
                .payoff()
                .ok_or(PricingError::MissingInput("payoff for an everlasting option"))?;
            let (x0, mu) = (model.x0(), model.x_drift_a(env));
            simulate(cfg.units(), cfg.seed, |rng, w| {
                let tau = exponential_time(rng, kappa);
                brownian(rng, dim, tau, w);
                with_antithetic(anti, w, |w| {
                    payoff.value(x0 * log_growth(mu, sigma_x, tau, w).exp())
                })
            })
        }
    };

    let est = acc.estimate();
    if contract.kind() == ContractKind::Inverse {
        let m = est.mean;
        return Ok(McEstimate {
            mean: 1.0 / m,
            std_error: est.std_error / (m * m),
            n: est.n,
        });
    }
    Ok(est)
}

/// Everlasting call or put estimated from the exponential maturity alone:
/// each draw of `tau` contributes the lognormal expectation of the payoff at
/// `tau`. Unlike [`mc_price`] this has finite variance for any volatility.
pub fn everlasting_conditional_mc(
    contract: &ContractSpec,
    model: &GbmModel,
    env: &RateEnvironment,
    cfg: &McConfig,
) -> Result<McEstimate> {
    env.require(TimeMode::ContinuousTime)?;
    cfg.validate()?;
    if contract.funding().iota() != 0.0 {
        return Err(PricingError::UnsupportedRepresentation(
            "random-maturity sampling needs iota = 0; use the closed-form pricers",
        ));
    }
    let (strike, call) = match contract.payoff() {
        Some(Payoff::Call { strike }) => (*strike, true),
        Some(Payoff::Put { strike }) => (*strike, false),
        _ => {
            return Err(PricingError::UnsupportedRepresentation(
                "conditional sampling covers calls and puts",
            ))
        }
    };
    let kappa = contract.funding().kappa();
    let (x0, mu) = (model.x0(), model.x_drift_a(env));
    let sigma = model.sigma_x_norm_sq().sqrt();
    let acc = simulate(cfg.n_samples, cfg.seed, |rng, _| {
        let tau = exponential_time(rng, kappa);
        if call {
            expected_call_payoff(x0, strike, mu, sigma, tau)
        } else {
            expected_put_payoff(x0, strike, mu, sigma, tau)
        }
    });
    Ok(acc.estimate())
}

/// Quanto price estimated under the a-measure: `z` is sampled with its
/// a-measure drift and weighted by the density of the b-measure.
///
/// This route never uses the drift adjustment and so checks it.
pub fn quanto_density_weighted(
    contract: &ContractSpec,
    model: &GbmModel,
    env: &RateEnvironment,
    cfg: &McConfig,
) -> Result<McEstimate> {
    env.require(TimeMode::ContinuousTime)?;
    cfg.validate()?;
    if contract.kind() != ContractKind::Quanto {
        return Err(PricingError::UnsupportedRepresentation(
            "density weighting is implemented for quanto contracts",
        ));
    }
    if contract.funding().iota() != 0.0 {
        return Err(PricingError::UnsupportedRepresentation(
            "random-maturity sampling needs iota = 0; use the closed-form pricers",
        ));
    }
    let (z0, sigma_z) = model.require_quanto()?;
    let kappa = contract.funding().kappa();
    let (x0, mu_x, mu_z) = (model.x0(), model.x_drift_a(env), model.z_drift_a(env)?);
    let sigma_x = model.sigma_x();
    let dim = model.dimension();
    let anti = cfg.antithetic;
    let acc = simulate(cfg.units(), cfg.seed, |rng, w| {
        let tau = exponential_time(rng, kappa);
        brownian(rng, dim, tau, w);
        with_antithetic(anti, w, |w| {
            let x = x0 * log_growth(mu_x, sigma_x, tau, w).exp();
            let z = z0 * log_growth(mu_z, sigma_z, tau, w).exp();
            let density = (-env.spread() * tau).exp() * x / x0;
            density * z
        })
    });
    Ok(acc.estimate())
}

/// Simulates the spot to time `t` along an exact lognormal path under the
/// a-measure and returns `value(x_t)` averaged over paths.
fn path_check(
    model: &GbmModel,
    env: &RateEnvironment,
    t: f64,
    cfg: &McConfig,
    value: impl Fn(f64) -> f64 + Sync,
) -> Result<McEstimate> {
    cfg.validate()?;
    positive("t", t)?;
    let steps = ((t * cfg.n_steps_per_year as f64).ceil() as usize).max(1);
    let dt = t / steps as f64;
    let sigma = model.sigma_x();
    let dim = model.dimension();
    let mu = match env.mode() {
        TimeMode::ContinuousTime => env.spread(),
        TimeMode::DiscreteTime => ((1.0 + env.r_a()) / (1.0 + env.r_b())).ln(),
    };
    let x0 = model.x0();
    let acc = simulate(cfg.units(), cfg.seed, |rng, w| {
        let mut log_x = 0.0;
        for _ in 0..steps {
            brownian(rng, dim, dt, w);
            log_x += log_growth(mu, sigma, dt, w);
        }
        if cfg.antithetic {
            // mirror the whole path: the drift part is shared
            let drift_part = (mu - 0.5 * dot(sigma, sigma)) * t;
            let mirrored = 2.0 * drift_part - log_x;
            0.5 * (value(x0 * log_x.exp()) + value(x0 * mirrored.exp()))
        } else {
            value(x0 * log_x.exp())
        }
    });
    Ok(acc.estimate())
}

/// Estimates `E_a[(B_b(t) / B_a(t)) x_t]`, which equals `x_0` when the
/// discounted b-asset is an a-martingale.
///
/// In discrete mode `t` counts periods and the model volatility is read per
/// period.
pub fn martingale_check(
    model: &GbmModel,
    env: &RateEnvironment,
    t: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    let carry = env.bank_account(Currency::B, t)? / env.bank_account(Currency::A, t)?;
    path_check(model, env, t, cfg, |x| carry * x)
}

/// Mean of the measure-change density at `t`; equals one.
pub fn density_check(
    model: &GbmModel,
    env: &RateEnvironment,
    t: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    let x0 = model.x0();
    let carry = env.bank_account(Currency::B, t)? / env.bank_account(Currency::A, t)?;
    path_check(model, env, t, cfg, |x| carry * x / x0)
}
