use dualcert::classifier::FnClassifier;
use dualcert::data::LabeledDataset;
use dualcert::numerics::{clopper_pearson_lower, erf, inv_norm_cdf, ConfidenceLevel, RngSeed};
use dualcert::smoothing::{certified_accuracy_curve, radius_from_bound, smooth_certify, SmoothingConfig};

#[test]
fn erf_and_quantile_agree_with_series() {
    for i in -30..=30 {
        let x = i as f64 / 10.0;
        assert!((erf(x) - dualcert_testkit::erf_series(x)).abs() <= 1e-12);
    }
    for p in [0.001, 0.05, 0.3, 0.5, 0.9, 0.975, 0.999] {
        assert!((inv_norm_cdf(p).unwrap() - dualcert_testkit::normal_quantile_bisect(p)).abs() <= 1e-9);
    }
}

#[test]
fn all_agree_radius() {
    let conf = ConfidenceLevel::new(0.999).unwrap();
    let p = clopper_pearson_lower(100, 100, conf).unwrap();
    assert!((p - 0.001f64.powf(0.01)).abs() <= 1e-12);
    let cert = radius_from_bound(Some(0), p, 0.02).unwrap();
    let oracle = 0.02 * dualcert_testkit::normal_quantile_bisect(0.001f64.powf(0.01));
    assert!((cert.radius - oracle).abs() <= 1e-9);
    assert!((cert.radius - 0.0300).abs() <= 1e-4);

    let constant = FnClassifier::new(2, |_: &[f64]| Some(1));
    let c = smooth_certify(&constant, &[0.0, 0.0], &SmoothingConfig::default()).unwrap();
    assert_eq!(c.predicted, Some(1));
    assert!((c.radius - cert.radius).abs() <= 1e-12);
}

#[test]
fn curve_is_nonincreasing_and_seeded() {
    let half = FnClassifier::new(2, |x: &[f64]| Some(usize::from(x[0] > 0.0)));
    let pts: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 - 19.5) * 0.003, 0.0]).collect();
    let labels: Vec<usize> = pts.iter().map(|p| usize::from(p[0] > 0.0)).collect();
    let data = LabeledDataset::new(pts, labels, 2).unwrap();
    let radii: Vec<f64> = (0..20).map(|i| i as f64 * 0.002).collect();
    let cfg = SmoothingConfig { seed: RngSeed(9), ..SmoothingConfig::default() };
    let a = certified_accuracy_curve(&half, &data, &cfg, &radii).unwrap();
    let b = certified_accuracy_curve(&half, &data, &cfg, &radii).unwrap();
    assert_eq!(a, b);
    for w in a.windows(2) {
        assert!(w[1].certified_accuracy <= w[0].certified_accuracy);
    }
}
