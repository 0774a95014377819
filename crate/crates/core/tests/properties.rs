use chrono::{TimeZone, Utc};
use proptest::prelude::*;

use perpetual::continuous::{ct_linear_price, ct_quanto_price, CtPriceInputs};
use perpetual::discrete::{
    dt_equalizing_iota, dt_price, dt_truncated_sum_oracle, DtPriceInputs, FuturesKind,
};
use perpetual::everlasting::{
    characteristic_roots, everlasting_call, everlasting_call_delta, everlasting_put,
    BsEverlastingInputs,
};
use perpetual::history::{read_funding_history, write_funding_history, FundingHistoryRow};
use perpetual::replication::{dt_cash_and_carry, incorrect_spec_comparison};
use perpetual::{ContractKind, FundingSpec, GbmModel, RateEnvironment};

fn kind() -> impl Strategy<Value = FuturesKind> {
    prop_oneof![Just(FuturesKind::Linear), Just(FuturesKind::Inverse)]
}

/// Admissible discrete inputs: integrable and with `iota < kappa`.
fn dt_inputs() -> impl Strategy<Value = (FuturesKind, f64, f64, f64, f64, f64)> {
    (kind(), -0.02..0.05f64, -0.02..0.05f64, 0.01..1.0f64, -0.5..0.99f64, 0.1..100.0f64)
        .prop_filter("integrable", |&(k, r_a, r_b, kappa, _, _)| {
            let ratio = match k {
                FuturesKind::Linear => (1.0 + r_a) / ((1.0 + kappa) * (1.0 + r_b)),
                FuturesKind::Inverse => (1.0 + r_b) / ((1.0 + kappa) * (1.0 + r_a)),
            };
            ratio < 0.999
        })
        .prop_map(|(k, r_a, r_b, kappa, frac, x)| (k, r_a, r_b, kappa, frac * kappa, x))
}

fn dt_value(k: FuturesKind, r_a: f64, r_b: f64, kappa: f64, iota: f64, x: f64) -> f64 {
    let inputs = DtPriceInputs::new(
        RateEnvironment::discrete(r_a, r_b).unwrap(),
        FundingSpec::new(kappa, iota).unwrap(),
        x,
    )
    .unwrap();
    dt_price(k, &inputs).unwrap().value
}

fn fig3_like(r_a: f64, r_b: f64, kappa: f64, strike: f64, sigma: f64, x: f64) -> BsEverlastingInputs {
    BsEverlastingInputs::new(RateEnvironment::continuous(r_a, r_b).unwrap(), kappa, strike, sigma, x)
        .unwrap()
}

/// Continuous everlasting inputs with `kappa > r_a - r_b`.
fn bs_params() -> impl Strategy<Value = (f64, f64, f64, f64, f64)> {
    (-0.05..0.1f64, -0.05..0.1f64, 0.05..3.0f64, 0.5..2.0f64, 0.05..1.5f64)
        .prop_filter("kappa above drift", |&(r_a, r_b, kappa, _, _)| kappa - (r_a - r_b) > 1e-3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn closed_form_matches_series((k, r_a, r_b, kappa, iota, x) in dt_inputs()) {
        let env = RateEnvironment::discrete(r_a, r_b).unwrap();
        let funding = FundingSpec::new(kappa, iota).unwrap();
        let oracle = dt_truncated_sum_oracle(&env, &funding, k, x, None, 1e-12 * x).unwrap();
        let closed = dt_value(k, r_a, r_b, kappa, iota, x);
        let tail = oracle.tail_bound().unwrap();
        prop_assert!((closed - oracle.value).abs() <= tail + 1e-10 * closed);
    }

    #[test]
    fn price_is_positive_and_homogeneous((k, r_a, r_b, kappa, iota, x) in dt_inputs(), scale in 0.01..100.0f64) {
        let f = dt_value(k, r_a, r_b, kappa, iota, x);
        prop_assert!(f > 0.0);
        let g = dt_value(k, r_a, r_b, kappa, iota, scale * x);
        prop_assert!((g - scale * f).abs() <= 1e-12 * g);
    }

    #[test]
    fn basis_sign_follows_rate_spread((k, r_a, r_b, kappa, _iota, x) in dt_inputs()) {
        let f = dt_value(k, r_a, r_b, kappa, 0.0, x);
        let spread = r_a - r_b;
        if spread > 1e-9 {
            prop_assert!(f > x);
        } else if spread < -1e-9 {
            prop_assert!(f < x);
        }
    }

    #[test]
    fn stronger_anchoring_pulls_price_to_spot(
        (k, r_a, r_b, kappa, _iota, x) in dt_inputs(),
        bump in 0.01..1.0f64,
    ) {
        let near = dt_value(k, r_a, r_b, kappa + bump, 0.0, x);
        let far = dt_value(k, r_a, r_b, kappa, 0.0, x);
        prop_assert!((near - x).abs() <= (far - x).abs() * (1.0 + 1e-12));
    }

    #[test]
    fn equalized_price_is_spot(
        k in kind(),
        r_a in -0.05..0.1f64,
        r_b in -0.05..0.1f64,
        excess in 1e-3..2.0f64,
        x in 0.01..1e4f64,
    ) {
        let env = RateEnvironment::discrete(r_a, r_b).unwrap();
        let base = dt_equalizing_iota(&env, k, 1e6).unwrap();
        let kappa = base.abs() + excess;
        let iota = dt_equalizing_iota(&env, k, kappa).unwrap();
        let f = dt_value(k, r_a, r_b, kappa, iota, x);
        prop_assert!((f / x - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn quanto_on_the_base_pair_is_linear_with_shifted_rate(
        r_a in -0.05..0.1f64,
        r_b in -0.05..0.1f64,
        s1 in -0.5..0.5f64,
        s2 in -0.5..0.5f64,
        extra in 0.05..2.0f64,
    ) {
        // z = x: c = b and sigma_z = sigma_x
        let norm_sq = s1 * s1 + s2 * s2;
        let kappa = (r_a - r_b + norm_sq).max(0.0) + extra;
        let env = RateEnvironment::continuous(r_a, r_b).unwrap().with_r_c(r_b).unwrap();
        let model = GbmModel::new(1.3, vec![s1, s2]).unwrap().with_quanto(1.3, vec![s1, s2]).unwrap();
        let funding = FundingSpec::new(kappa, 0.0).unwrap();
        let q = ct_quanto_price(&CtPriceInputs::new(env, funding, model.clone()).unwrap()).unwrap().value;
        let shifted = RateEnvironment::continuous(r_a + norm_sq, r_b).unwrap();
        let l = ct_linear_price(&CtPriceInputs::new(shifted, funding, model).unwrap()).unwrap().value;
        prop_assert!((q - l).abs() <= 1e-12 * l);
    }

    #[test]
    fn carry_legs_agree(
        r_a in -0.5..1.0f64,
        r_b in -0.5..1.0f64,
        x_t in 1e-3..1e6f64,
        move_ in 0.1..10.0f64,
    ) {
        let env = RateEnvironment::discrete(r_a, r_b).unwrap();
        let x_t1 = x_t * move_;
        let (f, c) = dt_cash_and_carry(&env, x_t, x_t1).unwrap();
        prop_assert!((f - c).abs() <= 1e-12 * x_t.max(x_t1));
    }

    #[test]
    fn spot_charged_gap_is_positive(r_a in 1e-4..0.5f64, kappa_over in 1.01..50.0f64, x in 0.1..10.0f64) {
        let c = incorrect_spec_comparison(r_a, r_a * kappa_over, x).unwrap();
        prop_assert!(c.gap > 0.0);
        prop_assert!((c.correct_price - c.incorrect_price - c.gap).abs() <= 1e-12 * c.correct_price);
    }

    #[test]
    fn everlasting_call_shape((r_a, r_b, kappa, strike, sigma) in bs_params(), u in 0.01..3.0f64, du in 1e-3..0.5f64) {
        let (x1, x2) = (u * strike, (u + du) * strike);
        let lo = fig3_like(r_a, r_b, kappa, strike, sigma, x1);
        let hi = fig3_like(r_a, r_b, kappa, strike, sigma, x2);
        let mid = fig3_like(r_a, r_b, kappa, strike, sigma, 0.5 * (x1 + x2));
        let (c1, c2, cm) = (
            everlasting_call(&lo).unwrap(),
            everlasting_call(&hi).unwrap(),
            everlasting_call(&mid).unwrap(),
        );
        let scale = 1e-12 * strike.max(x2);
        prop_assert!(c1 >= -scale && c2 >= c1 - scale);
        prop_assert!(cm <= 0.5 * (c1 + c2) + scale);

        let cap = kappa / (kappa - (r_a - r_b));
        for inputs in [&lo, &hi] {
            let d = everlasting_call_delta(inputs).unwrap();
            prop_assert!(d >= -1e-12 && d <= cap + 1e-12);
            let p = everlasting_put(inputs).unwrap();
            let f = cap * inputs.spot;
            prop_assert!(p >= -1e-12 * strike.max(f));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn roots_straddle_zero_and_one((r_a, r_b, kappa, strike, sigma) in bs_params()) {
        let inputs = fig3_like(r_a, r_b, kappa, strike, sigma, strike);
        let r = characteristic_roots(&inputs).unwrap();
        prop_assert!(r.pi < 0.0 && r.theta > 1.0);
        let mu = r_a - r_b;
        for xi in [r.pi, r.theta] {
            let q = mu * xi + 0.5 * xi * (xi - 1.0) * sigma * sigma - kappa;
            let scale = (mu * xi).abs() + (0.5 * xi * xi * sigma * sigma).abs() + kappa;
            prop_assert!(q.abs() <= 1e-12 * scale);
        }
    }
}

fn row_strategy() -> impl Strategy<Value = (i64, u32, f64, f64, f64, bool)> {
    (
        0i64..86_400,
        0u32..1_000_000_000,
        1e-8..1e8f64,
        1e-8..1e8f64,
        -1.0..1.0f64,
        any::<bool>(),
    )
}

proptest! {
    #[test]
    fn history_round_trip_is_exact(steps in prop::collection::vec(row_strategy(), 1..40)) {
        let mut t = Utc.with_ymd_and_hms(2021, 3, 4, 5, 6, 7).unwrap();
        let rows: Vec<FundingHistoryRow> = steps
            .into_iter()
            .map(|(secs, nanos, spot, futures_price, funding_rate, inverse)| {
                t += chrono::Duration::seconds(secs + 1) + chrono::Duration::nanoseconds(nanos as i64);
                FundingHistoryRow {
                    timestamp: t,
                    spot,
                    futures_price,
                    funding_rate,
                    kind: if inverse { ContractKind::Inverse } else { ContractKind::Linear },
                }
            })
            .collect();
        let mut buf = Vec::new();
        write_funding_history(&rows, &mut buf).unwrap();
        let back = read_funding_history(buf.as_slice()).unwrap();
        prop_assert_eq!(back, rows);
    }
}
