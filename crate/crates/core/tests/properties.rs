use dualcert::bpdn::{active_set, solve, DualProblemInstance, SolverOptions, DEFAULT_TAU};
use dualcert::classifier::{aggregate, AggregationRule};
use dualcert::data::Dictionary;
use dualcert::numerics::{clopper_pearson_lower, ConfidenceLevel};
use proptest::prelude::*;

fn columns(n: usize, m: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-1.0f64..1.0, n), m)
        .prop_filter("nonzero columns", |cols| cols.iter().all(|c| c.iter().map(|v| v * v).sum::<f64>() > 1e-3))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn active_set_is_odd_in_x(cols in columns(3, 6), x in prop::collection::vec(-2.0f64..2.0, 3)) {
        let dict = Dictionary::from_columns(&cols, vec![0; 6], 1).unwrap();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let a = active_set(&solve(&DualProblemInstance::new(&dict, &x, 2.0).unwrap(), &SolverOptions::default()).unwrap(), DEFAULT_TAU).unwrap();
        let b = active_set(&solve(&DualProblemInstance::new(&dict, &neg, 2.0).unwrap(), &SolverOptions::default()).unwrap(), DEFAULT_TAU).unwrap();
        prop_assume!(!a.near_degenerate && !b.near_degenerate);
        prop_assert_eq!(a.len(), b.len());
        for (ea, eb) in a.entries.iter().zip(&b.entries) {
            prop_assert_eq!(ea.index, eb.index);
            prop_assert_ne!(ea.sign, eb.sign);
        }
    }

    #[test]
    fn signed_view_negates(cols in columns(4, 5), j in 0usize..10) {
        let dict = Dictionary::from_columns(&cols, vec![0; 5], 1).unwrap();
        let t = dict.signed_column(j);
        let s = dict.column(j % 5);
        let sign = if j < 5 { 1.0 } else { -1.0 };
        prop_assert!(t.iter().zip(s).all(|(a, b)| *a == sign * b));
    }

    #[test]
    fn clopper_pearson_is_below_the_mle(n in 1u64..500, frac in 0.0f64..=1.0) {
        let k = ((n as f64) * frac).round() as u64;
        let p = clopper_pearson_lower(k, n, ConfidenceLevel::new(0.999).unwrap()).unwrap();
        prop_assert!(p <= k as f64 / n as f64 + 1e-12);
        prop_assert!(p >= 0.0);
    }

    #[test]
    fn aggregation_ignores_order(mut labels in prop::collection::vec(0usize..4, 1..20), seed in any::<u64>()) {
        let a = aggregate(&labels, 4, AggregationRule::Majority);
        let u = aggregate(&labels, 4, AggregationRule::UnanimousOrAbstain);
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(labels.as_mut_slice(), &mut rng);
        prop_assert_eq!(a, aggregate(&labels, 4, AggregationRule::Majority));
        prop_assert_eq!(u, aggregate(&labels, 4, AggregationRule::UnanimousOrAbstain));
    }
}
