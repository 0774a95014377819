use perpetual::continuous::{ct_linear_price, CtPriceInputs};
use perpetual::discrete::{dt_linear_price, dt_random_maturity_price, DtPriceInputs};
use perpetual::everlasting::{everlasting_call, everlasting_put, BsEverlastingInputs};
use perpetual::mc::{
    density_check, everlasting_conditional_mc, martingale_check, mc_price, sample_log_spot,
    McConfig,
};
use perpetual::{
    ContractSpec, FundingConvention, FundingSpec, GbmModel, Payoff, RateEnvironment,
};

fn linear_setup() -> (ContractSpec, GbmModel, RateEnvironment) {
    (
        ContractSpec::linear(FundingSpec::new(0.5, 0.0).unwrap()),
        GbmModel::new(1.0, vec![0.3, 0.1]).unwrap(),
        RateEnvironment::continuous(0.03, 0.01).unwrap(),
    )
}

#[test]
fn estimate_does_not_depend_on_thread_count() {
    let (contract, model, env) = linear_setup();
    let cfg = McConfig::new(50_000, 17);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| mc_price(&contract, &model, &env, &cfg).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(3));
}

#[test]
fn antithetic_pairs_reduce_the_error() {
    // kappa > 4 mu + 6 |sigma|^2 keeps the fourth moment of x_tau finite, so
    // the reported standard error is itself reliable
    let (contract, _, env) = linear_setup();
    let model = GbmModel::new(1.0, vec![0.1, 0.05]).unwrap();
    let closed = ct_linear_price(&CtPriceInputs::new(env, *contract.funding(), model.clone()).unwrap())
        .unwrap()
        .value;
    let (mut sum, mut var) = (0.0, 0.0);
    let seeds = 0..10u64;
    let k = seeds.end as f64;
    for seed in seeds {
        let plain = mc_price(&contract, &model, &env, &McConfig::new(40_000, seed)).unwrap();
        let cfg = McConfig::new(40_000, seed).with_antithetic(true);
        let anti = mc_price(&contract, &model, &env, &cfg).unwrap();
        assert!(anti.std_error < 0.6 * plain.std_error, "{anti:?} vs {plain:?}");
        sum += anti.mean;
        var += anti.std_error.powi(2);
    }
    let z = (sum / k - closed) / (var.sqrt() / k);
    assert!(z.abs() <= 3.0, "pooled z {z}");
}

#[test]
fn exact_sampling_has_lognormal_moments() {
    let model = GbmModel::new(2.0, vec![0.4, 0.3]).unwrap();
    let (drift, tau, n) = (0.05, 2.0, 200_000u64);
    let logs = sample_log_spot(&model, drift, tau, n, 11);
    assert_eq!(logs.len(), n as usize);
    let var_true = 0.25 * tau;
    let mean_true = (drift - 0.5 * 0.25) * tau;
    let mean = logs.iter().sum::<f64>() / n as f64;
    let var = logs.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!((mean - mean_true).abs() < 4.0 * (var_true / n as f64).sqrt());
    // the sample variance of a normal has standard error var * sqrt(2 / n)
    assert!((var - var_true).abs() < 4.0 * var_true * (2.0 / n as f64).sqrt());
    assert_eq!(logs, sample_log_spot(&model, drift, tau, n, 11));
}

#[test]
fn discounted_b_account_is_a_martingale() {
    let model = GbmModel::scalar(1.5, 0.4).unwrap();
    let cfg = McConfig::new(40_000, 21).with_steps_per_year(50);
    let env = RateEnvironment::continuous(0.04, 0.01).unwrap();
    assert!(martingale_check(&model, &env, 2.0, &cfg).unwrap().brackets(1.5, 3.0));
    assert!(density_check(&model, &env, 2.0, &cfg).unwrap().brackets(1.0, 3.0));

    let env = RateEnvironment::discrete(0.001, 0.0005).unwrap();
    let model = GbmModel::scalar(1.5, 0.02).unwrap();
    assert!(martingale_check(&model, &env, 30.0, &cfg).unwrap().brackets(1.5, 3.0));
}

#[test]
fn geometric_maturity_reproduces_discrete_price() {
    let env = RateEnvironment::discrete(0.002, 0.0005).unwrap();
    let funding = FundingSpec::new(0.05, 0.0).unwrap().with_delta(1.0).unwrap();
    let model = GbmModel::scalar(1.0, 0.02).unwrap();
    let est = dt_random_maturity_price(&env, &funding, &model, &McConfig::new(100_000, 4)).unwrap();
    let closed = dt_linear_price(&DtPriceInputs::new(env, funding, 1.0).unwrap()).unwrap().value;
    let se = est.std_error().unwrap();
    assert!((est.value - closed).abs() <= 3.0 * se, "{} vs {closed} (se {se})", est.value);
}

#[test]
fn mark_value_price_matches_one_period_growth() {
    // Under mark-value funding a price f = c x solves
    // c g - c - g iota_hat - g kappa_hat (c - 1) = 0 with g = E[x_1 / x_0].
    let env = RateEnvironment::discrete(0.01, 0.002).unwrap();
    let (hat_kappa, hat_iota) = (0.2, 0.003);
    let funding = FundingSpec::new(hat_kappa, hat_iota)
        .unwrap()
        .with_convention(FundingConvention::MarkValue);
    let closed = dt_linear_price(&DtPriceInputs::new(env, funding, 1.0).unwrap()).unwrap().value;

    let growth_drift = ((1.0 + env.r_a()) / (1.0 + env.r_b())).ln();
    let model = GbmModel::scalar(1.0, 0.1).unwrap();
    let logs = sample_log_spot(&model, growth_drift, 1.0, 200_000, 8);
    let n = logs.len() as f64;
    let samples: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
    let g = samples.iter().sum::<f64>() / n;
    let g_se = (samples.iter().map(|s| (s - g).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();

    let c = |g: f64| (hat_kappa - hat_iota) * g / (1.0 + (hat_kappa - 1.0) * g);
    let slope = (c(g + 1e-7) - c(g - 1e-7)) / 2e-7;
    let se = slope.abs() * g_se;
    assert!((c(g) - closed).abs() <= 3.0 * se, "{} vs {closed} (se {se})", c(g));
}

#[test]
fn conditional_sampling_prices_calls_and_puts() {
    let env = RateEnvironment::continuous(0.02, 0.01).unwrap();
    let model = GbmModel::scalar(1.1, 0.6).unwrap();
    let funding = FundingSpec::new(0.8, 0.0).unwrap();
    let inputs = BsEverlastingInputs::new(env, 0.8, 1.0, 0.6, 1.1).unwrap();
    for (payoff, closed) in [
        (Payoff::Call { strike: 1.0 }, everlasting_call(&inputs).unwrap()),
        (Payoff::Put { strike: 1.0 }, everlasting_put(&inputs).unwrap()),
    ] {
        let contract = ContractSpec::everlasting(funding, payoff).unwrap();
        let est = everlasting_conditional_mc(&contract, &model, &env, &McConfig::new(100_000, 2)).unwrap();
        assert!(est.brackets(closed, 3.0), "{est:?} vs {closed}");
    }
}

#[test]
fn direct_sampling_agrees_when_variance_is_finite() {
    // second moment of the payoff at tau is finite when kappa > 2 mu + sigma^2
    let env = RateEnvironment::continuous(0.0, 0.0).unwrap();
    let model = GbmModel::scalar(1.0, 0.3).unwrap();
    let funding = FundingSpec::new(1.0, 0.0).unwrap();
    let contract = ContractSpec::everlasting(funding, Payoff::Call { strike: 1.0 }).unwrap();
    let est = mc_price(&contract, &model, &env, &McConfig::new(100_000, 3)).unwrap();
    let closed = everlasting_call(&BsEverlastingInputs::new(env, 1.0, 1.0, 0.3, 1.0).unwrap()).unwrap();
    assert!(est.brackets(closed, 3.0), "{est:?} vs {closed}");
}
