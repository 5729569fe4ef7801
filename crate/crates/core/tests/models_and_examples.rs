mod common;

use dualcert::analytic::{
    cap_measure, cube_concentration, cube_risk_bound, cube_worst_case_attack, empirical_concentration_curve, sample_cube,
    sphere_risk_curve, CubeClassifier, CubeExampleParams, Psi, SphereExampleParams,
};
use dualcert::attacks::estimate_robust_risk;
use dualcert::classifier::{accuracy, predict_nearest_subspace, AggregationRule, Classifier, DualClassifier};
use dualcert::data::{build_dictionary, generate_uos, LabeledDataset, SubspaceModel};
use dualcert::numerics::RngSeed;
use dualcert::par::Execution;

#[test]
fn nearest_subspace_is_exact_on_clean_uos() {
    let model = SubspaceModel::random(20, 3, 4, 0.05, RngSeed(1)).unwrap();
    let data = generate_uos(&model, 50, RngSeed(2)).unwrap();
    let preds: Vec<Option<usize>> = data.points().iter().map(|x| Some(predict_nearest_subspace(&model, x))).collect();
    assert_eq!(accuracy(&preds, data.labels()), 1.0);
}

#[test]
fn dual_classifier_on_two_planes() {
    let model = SubspaceModel::random(10, 2, 2, 0.0, RngSeed(5)).unwrap();
    let train = generate_uos(&model, 60, RngSeed(6)).unwrap();
    let test = generate_uos(&model, 20, RngSeed(7)).unwrap();
    let dict = build_dictionary(&train, 120, RngSeed(8)).unwrap();
    let clf = DualClassifier::new(&dict, 2.0, AggregationRule::Majority).unwrap();
    let preds: Vec<Option<usize>> = test.points().iter().map(|x| clf.classify(x)).collect();
    assert_eq!(accuracy(&preds, test.labels()), 1.0);
    // scaling x and 1/lambda together leaves the prediction unchanged
    let clf2 = DualClassifier::new(&dict, 4.0, AggregationRule::Majority).unwrap();
    for x in test.points() {
        let half: Vec<f64> = x.iter().map(|v| v / 2.0).collect();
        assert_eq!(clf.classify(x), clf2.classify(&half));
    }
}

#[test]
fn cap_measure_matches_monte_carlo() {
    for alpha in [0.5, 1.0, 1.4] {
        let exact = cap_measure(10, alpha).unwrap();
        let mc = dualcert_testkit::monte_carlo_cap(10, alpha, 1_000_000, 17);
        assert!((exact - mc).abs() <= 0.01, "alpha {alpha}: {exact} vs {mc}");
    }
}

#[test]
fn sphere_curve_shape() {
    let p = SphereExampleParams::new(100, 0.1, Psi::Constant).unwrap();
    let grid: Vec<f64> = (0..=100).map(|i| 0.001 * i as f64).collect();
    for row in sphere_risk_curve(&p, &grid).unwrap() {
        assert!((row.class1_term - row.epsilon / 0.1).abs() <= 1e-12);
    }
    let wide: Vec<f64> = (0..=300).map(|i| 0.01 * i as f64).collect();
    let rows = sphere_risk_curve(&p, &wide).unwrap();
    for w in rows.windows(2) {
        assert!(w[1].risk >= w[0].risk - 1e-12);
        assert!(w[1].risk <= 1.0);
    }
}

#[test]
fn cube_risk_stays_below_bound() {
    for &(n, alpha, eps) in &[(5, 0.5, 0.0), (5, 1.0, 0.05), (10, 2.0, 0.1)] {
        let p = CubeExampleParams::new(n, alpha, eps).unwrap();
        let data = sample_cube(&p, 5000, RngSeed(3)).unwrap();
        let clf = CubeClassifier::new(p);
        let est = estimate_robust_risk(&clf, &data, |_, x, y| Ok(cube_worst_case_attack(&p, x, y)), Execution::Parallel).unwrap();
        assert!(est.risk <= cube_risk_bound(&p), "{est:?}");
        let (c, s) = cube_concentration(&p);
        assert_eq!((c.c, c.epsilon, c.delta), (0.5, alpha / n as f64 - 1.0, 0.0));
        assert_eq!(s.gamma, 0.5 * (-alpha).exp() + 2.0 * eps);
    }
}

#[test]
fn greedy_concentration_matches_brute_force() {
    let mut r = common::rng(41);
    let pts: Vec<Vec<f64>> = (0..30).map(|_| common::gaussian(&mut r, 3)).collect();
    let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
    let data = LabeledDataset::new(pts.clone(), labels.clone(), 3).unwrap();
    let grid: Vec<usize> = (1..=10).collect();
    let rows = empirical_concentration_curve(&data, &grid, false).unwrap();
    for row in &rows {
        let (eps, mass) = dualcert_testkit::greedy_concentration(&pts, &labels, row.m);
        assert!((row.epsilon - eps).abs() <= 1e-12);
        assert!((row.mass - mass).abs() <= 1e-12);
    }
    for w in rows.windows(2) {
        assert!(w[1].mass >= w[0].mass && w[1].epsilon <= w[0].epsilon);
    }
}
