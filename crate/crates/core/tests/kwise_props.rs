use kdesign::designmetrics::{state_moment, Sampling, DEFAULT_BUDGET};
use kdesign::ensembles::{EnsembleSpec, Independence};
use kdesign::gf2field::field_spec;
use kdesign::kwise::{eval_horner, eval_tree, sample_seed, verify_kwise};
use kdesign::randomness::StreamChooser;
use proptest::prelude::*;

proptest! {
    #[test]
    fn tree_and_horner_agree(m in 1u32..=64, k in 1usize..=16, seed in any::<u64>(), x in any::<u64>()) {
        let f = field_spec(m).unwrap();
        let mut c = StreamChooser::new(seed, "seed");
        let s = sample_seed(&f, k, &mut c).unwrap();
        prop_assert_eq!(s.bit_len(), k as u64 * m as u64);
        let x = f.elem(x & f.mask()).unwrap();
        prop_assert_eq!(eval_tree(&s, x).unwrap(), eval_horner(&s, x).unwrap());
    }

    #[test]
    fn fewer_points_than_k_are_uniform(m in 1u32..=4, pts in proptest::collection::btree_set(0u64..16, 1..=3), tv in any::<u64>()) {
        let f = field_spec(m).unwrap();
        let points: Vec<u64> = pts.into_iter().map(|p| p & f.mask()).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        let t = points.len();
        let targets: Vec<u64> = (0..t).map(|i| (tv >> (8 * i)) & f.mask()).collect();
        let k = 3;
        prop_assume!(k as u32 * m <= 12);
        let r = verify_kwise(&f, k, &points, &targets).unwrap();
        prop_assert_eq!(r.num, 1);
        prop_assert_eq!(r.den, 1u64 << (m * t as u32));
    }
}

#[test]
fn kwise_phase_moments_equal_exact_function_moments() {
    let exact = Sampling::exact(DEFAULT_BUDGET);
    for (n, k) in [(1, 1), (1, 2), (2, 1), (2, 2), (3, 1)] {
        let spec = |independence| EnsembleSpec::RandomPhase { n, independence };
        let a = state_moment(&spec(Independence::KWise { k: 2 * k }), k, &exact).unwrap();
        let b = state_moment(&spec(Independence::ExactFunction), k, &exact).unwrap();
        assert!(a.operator.max_abs_diff(&b.operator) < 1e-12, "n={n} k={k}");
    }
}

#[test]
fn too_little_independence_changes_the_moment() {
    let exact = Sampling::exact(DEFAULT_BUDGET);
    let spec = |independence| EnsembleSpec::RandomPhase { n: 2, independence };
    let a = state_moment(&spec(Independence::KWise { k: 2 }), 2, &exact).unwrap();
    let b = state_moment(&spec(Independence::ExactFunction), 2, &exact).unwrap();
    assert!(a.operator.max_abs_diff(&b.operator) > 1e-3);
}
