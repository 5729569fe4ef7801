mod common;

use common::{random_dictionary, rng, unit};
use dualcert::attacks::{boundary_attack, pgd_in_certificate, AttackConfig};
use dualcert::bpdn::{active_set, solve, DualProblemInstance, SolverOptions, DEFAULT_TAU};
use dualcert::certificate::{build_certificate, DEFAULT_MAX_VERTICES};
use dualcert::classifier::{AggregationRule, Classifier, DualClassifier, FnClassifier};
use dualcert::data::Dictionary;
use dualcert::linalg::{add, scale};
use dualcert::numerics::RngSeed;
use rand::Rng;

#[test]
fn sampled_points_at_radius_are_certified() {
    let mut r = rng(31);
    let mut checked = 0;
    while checked < 8 {
        let n = r.random_range(2..=3);
        let m = r.random_range(3..=5);
        let dict = random_dictionary(&mut r, n, m, 2);
        let x: Vec<f64> = unit(&mut r, n).into_iter().map(|v| 2.0 * v).collect();
        let s = solve(&DualProblemInstance::new(&dict, &x, 2.0).unwrap(), &SolverOptions::default()).unwrap();
        let a = active_set(&s, DEFAULT_TAU).unwrap();
        if a.is_empty() || a.near_degenerate {
            continue;
        }
        let cert = build_certificate(&dict, &s, &a).unwrap();
        let rad = cert.exact_l2_radius(DEFAULT_MAX_VERTICES).unwrap();
        if !(rad.r0 > 1e-3) || !rad.r0.is_finite() {
            continue;
        }
        for _ in 0..1000 {
            let xp = add(&x, &scale(0.999 * rad.r0, &unit(&mut r, n)));
            assert!(cert.contains(&xp, 1e-6).unwrap());
        }
        // the closest facet is real: stepping past it leaves the region
        let out = add(&x, &scale(1.05 * rad.r0, &rad.witness_u));
        assert!(!cert.contains(&out, 1e-6).unwrap());
        checked += 1;
    }
}

#[test]
fn square_example_radius() {
    let dict = Dictionary::from_columns(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![0, 1], 2).unwrap();
    let x = [1.0, 0.25];
    let s = solve(&DualProblemInstance::new(&dict, &x, 2.0).unwrap(), &SolverOptions::default()).unwrap();
    let a = active_set(&s, DEFAULT_TAU).unwrap();
    let cert = build_certificate(&dict, &s, &a).unwrap();
    let rad = cert.exact_l2_radius(DEFAULT_MAX_VERTICES).unwrap();
    assert!((rad.r0 - 0.25).abs() <= 1e-6);
}

#[test]
fn pgd_cannot_flip_the_dual_classifier() {
    let mut r = rng(32);
    let dict = random_dictionary(&mut r, 6, 20, 2);
    let clf = DualClassifier::new(&dict, 2.0, AggregationRule::Majority).unwrap();
    let mut attacked = 0;
    for i in 0..40 {
        let x = dict.column(i % 20).to_vec();
        let pred = clf.predict(&x).unwrap();
        let (Some(label), Some(cert)) = (pred.prediction.label, pred.certificate.as_ref()) else { continue };
        let cfg = AttackConfig::new(0.5, RngSeed(i as u64));
        let res = pgd_in_certificate(&clf, &x, label, cert, &cfg).unwrap();
        assert!(!res.success);
        assert!(res.in_certificate);
        assert_eq!(clf.classify(&res.adversarial_x), Some(label));
        attacked += 1;
    }
    assert!(attacked > 10);
}

#[test]
fn boundary_attack_finds_a_halfplane_crossing() {
    let half = FnClassifier::new(2, |x: &[f64]| Some(usize::from(x[0] > 0.0)));
    let x = [0.3, 0.7];
    let res = boundary_attack(&half, &x, 1, &AttackConfig::new(0.5, RngSeed(4))).unwrap();
    assert!(res.success);
    assert_eq!(half.classify(&res.adversarial_x), Some(0));
    // the true distance is 0.3; the grid oracle confirms nothing closer exists
    let grid = dualcert_testkit::grid_search_2d([0.3, 0.7], 0.29 / 2f64.sqrt(), 50, |p| p[0] <= 0.0);
    assert!(grid.is_none());
    assert!(res.final_l2 >= 0.3 - 1e-9 && res.final_l2 <= 0.5);
}
