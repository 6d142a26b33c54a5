use kdesign::designmetrics::{state_moment, unitary_superoperator, Sampling, DEFAULT_BUDGET};
use kdesign::ensembles::{compose, draw_unitary, sample_state, sample_unitary, EnsembleSpec, Independence, SampleHandle};
use kdesign::randomness::StreamChooser;
use proptest::prelude::*;

fn families(n: usize) -> Vec<EnsembleSpec> {
    let independence = Independence::KWise { k: 4 };
    vec![
        EnsembleSpec::Lrfc { n, independence },
        EnsembleSpec::BlockedLrfc { n, xi: n / 2, independence },
        EnsembleSpec::AmplifiedBlockedLrfc { n, xi: n / 2, p: 2, independence },
        EnsembleSpec::Haar { n },
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn sampling_is_a_function_of_seed_and_index(seed in any::<u64>(), index in 0u64..1000) {
        let h = SampleHandle::new(seed, index);
        let state = EnsembleSpec::BlockedPhase { n: 4, xi: 1, independence: Independence::ExactFunction };
        prop_assert_eq!(sample_state(&state, &h).unwrap(), sample_state(&state, &h).unwrap());
        for spec in families(4) {
            let a = sample_unitary(&spec, &h).unwrap();
            prop_assert_eq!(a.max_abs_diff(&sample_unitary(&spec, &h).unwrap()), 0.0);
        }
    }

    /// A composed draw is the product of the factor draws taken in order
    /// from the same stream.
    #[test]
    fn composed_draw_is_product_of_factor_draws(seed in any::<u64>()) {
        let fs = families(2);
        let spec = compose(fs.clone()).unwrap();
        let whole = draw_unitary(&spec, &mut StreamChooser::new(seed, "c")).unwrap().to_dense().unwrap();
        let mut c = StreamChooser::new(seed, "c");
        let mut prod = None;
        for f in &fs {
            let u = draw_unitary(f, &mut c).unwrap().to_dense().unwrap();
            prod = Some(match prod {
                None => u,
                Some(p) => kdesign::quantsim::DenseOp::mul(&p, &u),
            });
        }
        prop_assert!(whole.max_abs_diff(&prod.unwrap()) < 1e-12);
    }
}

#[test]
fn monte_carlo_estimates_are_reproducible() {
    let spec = EnsembleSpec::BlockedPhase { n: 4, xi: 1, independence: Independence::ExactFunction };
    let s = Sampling::monte_carlo(500, 9);
    let a = state_moment(&spec, 2, &s).unwrap();
    let b = state_moment(&spec, 2, &s).unwrap();
    assert_eq!(a.operator.max_abs_diff(&b.operator), 0.0);
    assert_eq!(a.samples, 500);
}

#[test]
fn composed_superoperator_is_product_of_factor_superoperators() {
    let exact = Sampling::exact(DEFAULT_BUDGET);
    let pfc = EnsembleSpec::Pfc { n: 1, independence: Independence::ExactFunction };
    let m = unitary_superoperator(&pfc, 1, &exact).unwrap().operator;
    let c = unitary_superoperator(&compose(vec![pfc.clone(), pfc]).unwrap(), 1, &exact).unwrap().operator;
    assert!(c.max_abs_diff(&m.mul(&m)) < 1e-12);
}
