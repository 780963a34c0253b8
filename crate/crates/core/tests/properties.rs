use proptest::prelude::*;

use renewal_pricer::distributions::{convolve, discretize, DurationModel, ReturnModel};
use renewal_pricer::martingale::emm_shift;
use renewal_pricer::numerics::Numerics;
use renewal_pricer::pricing::{price, Payoff, PricingRequest};
use renewal_pricer::renewal::{counting_pmf, residual_lifetime};

fn duration_model() -> impl Strategy<Value = DurationModel> {
    prop_oneof![
        (0.5f64..20.0).prop_map(|r| DurationModel::exponential(r).unwrap()),
        (0.5f64..3.0, 0.05f64..1.0).prop_map(|(k, s)| DurationModel::weibull(k, s).unwrap()),
        (-3.0f64..0.0, 0.2f64..1.0).prop_map(|(m, v)| DurationModel::lognormal(m, v).unwrap()),
        (0.0f64..0.2, 0.05f64..0.5).prop_map(|(lo, w)| DurationModel::uniform(lo, lo + w).unwrap()),
    ]
}

fn return_model() -> impl Strategy<Value = ReturnModel> {
    prop_oneof![
        (-1e-3f64..1e-3, 1e-3f64..0.02).prop_map(|(m, s)| ReturnModel::normal(m, s).unwrap()),
        (-1e-3f64..1e-3, 1e-3f64..0.01).prop_map(|(m, b)| ReturnModel::laplace(m, b).unwrap()),
        proptest::collection::vec(-0.01f64..0.01, 5..40)
            .prop_map(|s| ReturnModel::empirical(s).unwrap()),
    ]
}

fn request(d: DurationModel, r: ReturnModel, payoff: Payoff) -> PricingRequest {
    PricingRequest {
        durations: d,
        returns: r,
        t: 0.0,
        n_t: 0,
        maturity: 0.5,
        payoff,
        at_renewal_epoch: true,
        numerics: Numerics {
            error_estimate: false,
            ..Numerics::default()
        },
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn convolution_is_symmetric(a in duration_model(), b in duration_model()) {
        let h = 0.005;
        let f = discretize(&a, 0.0, h, 401).unwrap();
        let g = discretize(&b, 0.0, h, 401).unwrap();
        let fg = convolve(&f, &g).unwrap();
        let gf = convolve(&g, &f).unwrap();
        for (x, y) in fg.values().iter().zip(gf.values()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn convolution_is_monotone_cdf(a in duration_model(), b in duration_model()) {
        let h = 0.005;
        let f = discretize(&a, 0.0, h, 401).unwrap();
        let g = discretize(&b, 0.0, h, 401).unwrap();
        let w = convolve(&f, &g).unwrap();
        prop_assert!(w.values().windows(2).all(|p| p[0] <= p[1]));
        prop_assert!(w.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn counting_law_sums_to_one(d in duration_model(), horizon in 0.05f64..2.0) {
        let numerics = Numerics { fast_paths: false, ..Numerics::default() };
        let law = counting_pmf(&d, horizon, numerics.eps_tail, &numerics).unwrap();
        prop_assert!((law.total() + law.tail_mass() - 1.0).abs() < 1e-9);
        prop_assert!(law.tail_mass() <= numerics.eps_tail);
        prop_assert!(law.probs().iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn shifted_returns_are_martingale_increments(r in return_model()) {
        let shifted = emm_shift(&r).unwrap();
        prop_assert!((shifted.mean_exp() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn residual_lifetime_is_a_cdf(d in duration_model(), t in 0.05f64..1.0, n_t in 0usize..4) {
        let numerics = Numerics { fast_paths: false, ..Numerics::default() };
        if let Ok(law) = residual_lifetime(&d, t, n_t, t + 1.0, &numerics) {
            let v = law.cdf.values();
            prop_assert!(v.windows(2).all(|p| p[0] <= p[1]));
            prop_assert!(v.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn call_is_bounded_and_decreasing_in_strike(
        d in duration_model(),
        r in return_model(),
        k in 0.9f64..1.1,
    ) {
        let c = |k: f64| price(&request(d.clone(), r.clone(), Payoff::call(k).unwrap())).unwrap().price;
        let (lo, hi) = (c(k), c(k + 0.01));
        prop_assert!(lo >= hi - 1e-12);
        prop_assert!(lo >= (1.0 - k).max(0.0) - 1e-9);
        prop_assert!(lo <= 1.0 + 1e-12);
    }
}
