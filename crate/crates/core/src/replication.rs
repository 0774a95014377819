//! Replication of equalized perpetual futures by trading the two currencies.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{positive, PricingError, Result};
use crate::mc::chunk_rng;
use crate::model::{GbmModel, RateEnvironment, TimeMode};

/// One-period cash flows of a long equalized futures and of the matching
/// cash-and-carry trade, in that order.
///
/// The futures leg is `x_{t+1} - x_t - iota x_t` with
/// `iota = (r_a - r_b) / (1 + r_b)`; the carry trade borrows `m x_t` units of
/// `a` and buys `m = 1 / (1 + r_b)` units of `b`.
pub fn dt_cash_and_carry(env: &RateEnvironment, x_t: f64, x_t1: f64) -> Result<(f64, f64)> {
    env.require(TimeMode::DiscreteTime)?;
    positive("x_t", x_t)?;
    positive("x_t1", x_t1)?;
    let (r_a, r_b) = (env.r_a(), env.r_b());
    let iota = (r_a - r_b) / (1.0 + r_b);
    let m = 1.0 / (1.0 + r_b);
    let futures = x_t1 - x_t - iota * x_t;
    let carry = m * (1.0 + r_b) * x_t1 - m * x_t * (1.0 + r_a);
    Ok((futures, carry))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestResult {
    pub terminal_value: f64,
    pub max_abs_value: f64,
    pub dt: f64,
    pub n_steps: usize,
    /// Portfolio value at every rebalancing date, starting from zero.
    pub path: Vec<f64>,
}

fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    positive("horizon", horizon)?;
    positive("dt", dt)?;
    let n = (horizon / dt).round();
    if n < 1.0 || ((n * dt - horizon) / horizon).abs() > 1e-9 {
        return Err(PricingError::invalid("dt", dt, "must divide the horizon"));
    }
    Ok(n as usize)
}

fn check_equalized(env: &RateEnvironment, kappa: f64) -> Result<f64> {
    env.require(TimeMode::ContinuousTime)?;
    positive("kappa", kappa)?;
    let iota = env.spread();
    if !(iota < kappa) {
        return Err(PricingError::PremiumTooSmall { iota, kappa });
    }
    Ok(iota)
}

/// Self-financing portfolio long one equalized futures (price `x_t`), short
/// `1 / B_b(t)` units of the `b` account and the rest in the `a` account.
/// The spot moves by exact lognormal steps driven by `shocks` (standard
/// normals); the accounts accrue exactly and the portfolio is rebalanced at
/// every step.
fn run_backtest(
    env: &RateEnvironment,
    x0: f64,
    sigma: f64,
    dt: f64,
    shocks: impl Iterator<Item = f64>,
) -> BacktestResult {
    let (r_a, r_b) = (env.r_a(), env.r_b());
    let iota = env.spread();
    let drift = (iota - 0.5 * sigma * sigma) * dt;
    let vol = sigma * dt.sqrt();
    let (grow_a, grow_b) = ((r_a * dt).exp(), (r_b * dt).exp());
    // funding paid over a step, at its conditional mean given x_k
    let funding_factor = (iota * dt).exp_m1();

    let mut path = vec![0.0];
    let (mut v, mut x) = (0.0f64, x0);
    let mut max_abs = 0.0f64;
    for z in shocks {
        let x_next = x * (drift + vol * z).exp();
        v = (v + x) * grow_a - grow_b * x_next + (x_next - x) - x * funding_factor;
        x = x_next;
        max_abs = max_abs.max(v.abs());
        path.push(v);
    }
    BacktestResult {
        terminal_value: v,
        max_abs_value: max_abs,
        dt,
        n_steps: path.len() - 1,
        path,
    }
}

/// Replicates a long equalized futures over `[0, horizon]` along one seeded
/// path. The value stays at zero up to a discretization error of order `dt`.
pub fn ct_replication_backtest(
    env: &RateEnvironment,
    model: &GbmModel,
    kappa: f64,
    horizon: f64,
    dt: f64,
    seed: u64,
) -> Result<BacktestResult> {
    check_equalized(env, kappa)?;
    let n = step_count(horizon, dt)?;
    let sigma = model.sigma_x_norm_sq().sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shocks: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    Ok(run_backtest(env, model.x0(), sigma, dt, shocks.into_iter()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub dts: Vec<f64>,
    /// Mean over paths of `max |v|`, one entry per step size.
    pub mean_max_abs: Vec<f64>,
    /// Observed orders between consecutive step sizes.
    pub orders: Vec<f64>,
    /// Largest `mean max |v| / (dt x_0)` across step sizes.
    pub constant: f64,
}

/// Backtests on `n_paths` seeded paths for each step size. Coarse levels
/// reuse the Brownian increments of the finest one so the errors are
/// compared path by path.
pub fn replication_convergence(
    env: &RateEnvironment,
    model: &GbmModel,
    kappa: f64,
    horizon: f64,
    dts: &[f64],
    n_paths: u64,
    seed: u64,
) -> Result<ConvergenceStudy> {
    check_equalized(env, kappa)?;
    if dts.len() < 2 || n_paths == 0 {
        return Err(PricingError::invalid(
            "dts",
            dts.len() as f64,
            "need at least two step sizes and one path",
        ));
    }
    let finest = dts.iter().cloned().fold(f64::INFINITY, f64::min);
    let n_fine = step_count(horizon, finest)?;
    let mut ratios = Vec::with_capacity(dts.len());
    for &dt in dts {
        step_count(horizon, dt)?;
        let r = (dt / finest).round();
        if ((r * finest - dt) / dt).abs() > 1e-9 {
            return Err(PricingError::invalid("dts", dt, "must be multiples of the finest step"));
        }
        ratios.push(r as usize);
    }
    let sigma = model.sigma_x_norm_sq().sqrt();

    let per_path: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = chunk_rng(seed, p);
            let fine: Vec<f64> = (0..n_fine).map(|_| StandardNormal.sample(&mut rng)).collect();
            dts.iter()
                .zip(&ratios)
                .map(|(&dt, &r)| {
                    let norm = (r as f64).sqrt();
                    let shocks = fine.chunks(r).map(|c| c.iter().sum::<f64>() / norm);
                    run_backtest(env, model.x0(), sigma, dt, shocks).max_abs_value
                })
                .collect()
        })
        .collect();

    let mean_max_abs: Vec<f64> = (0..dts.len())
        .map(|i| per_path.iter().map(|v| v[i]).sum::<f64>() / n_paths as f64)
        .collect();
    let orders = mean_max_abs
        .windows(2)
        .zip(dts.windows(2))
        .map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect();
    let constant = mean_max_abs
        .iter()
        .zip(dts)
        .map(|(e, dt)| e / (dt * model.x0()))
        .fold(0.0, f64::max);
    Ok(ConvergenceStudy {
        dts: dts.to_vec(),
        mean_max_abs,
        orders,
        constant,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpecComparison {
    pub incorrect_price: f64,
    pub correct_price: f64,
    pub gap: f64,
}

/// Price `(1 + r_a / kappa) x` obtained when funding is charged on the spot
/// but discounting is ignored, against the no-arbitrage price
/// `x / (1 - r_a / kappa)` with `r_b = iota = 0`.
pub fn incorrect_spec_comparison(r_a: f64, kappa: f64, x: f64) -> Result<SpecComparison> {
    positive("kappa", kappa)?;
    positive("x", x)?;
    if !(r_a >= 0.0) {
        return Err(PricingError::invalid("r_a", r_a, "must be non-negative"));
    }
    if !(kappa > r_a) {
        return Err(PricingError::DivergentPrice {
            condition: "kappa > r_a",
        });
    }
    let ratio = r_a / kappa;
    let incorrect_price = (1.0 + ratio) * x;
    let correct_price = x / (1.0 - ratio);
    Ok(SpecComparison {
        incorrect_price,
        correct_price,
        gap: x * ratio * ratio / (1.0 - ratio),
    })
}
