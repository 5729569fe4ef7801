//! One function per subcommand. Per-point work runs through
//! `dualcert::par`, so rows come out in input order either way.

use serde::Serialize;

use dualcert::analytic::{
    cube_concentration, cube_risk_bound, cube_worst_case_attack, empirical_concentration_curve, sample_cube, sphere_risk_curve,
    CubeClassifier, CubeExampleParams, Psi, SphereExampleParams,
};
use dualcert::attacks::{boundary_attack, estimate_robust_risk, pgd_in_certificate, AttackConfig};
use dualcert::certificate::{CertificateDocument, ExactRadiusResult, DEFAULT_MAX_VERTICES};
use dualcert::classifier::{AggregationRule, DualClassifier, NearestSubspace, ScoredClassifier};
use dualcert::numerics::{ConfidenceLevel, RngSeed};
use dualcert::par::{try_map_indexed, Execution};
use dualcert::smoothing::{certify_dataset, curve_from_certificates, Smoothed, SmoothingConfig};

use crate::cli::*;
use crate::dataset::{self, Split};
use crate::output::{LinePlot, OutputDir};
use crate::CliError;

const ATTACK_STREAM: u64 = 3;
const SMOOTHING_STREAM: u64 = 4;
const CUBE_STREAM: u64 = 5;
const GEN_TRAIN_STREAM: u64 = 6;
const GEN_TEST_STREAM: u64 = 7;

pub fn execute(cmd: &Command) -> Result<(), CliError> {
    let common = cmd.common();
    let mut out = OutputDir::create(&common.out)?;
    out.record_seed("seed", common.seed);
    let result = match cmd {
        Command::Certify(a) => certify(a, &mut out),
        Command::AttackProj(a) => attack_proj(a, &mut out),
        Command::AttackBb(a) => attack_bb(a, &mut out),
        Command::RsCurve(a) => rs_curve(a, &mut out),
        Command::Sphere(a) => sphere(a, &mut out),
        Command::Cube(a) => cube(a, &mut out),
        Command::Concentration(a) => concentration(a, &mut out),
        Command::GenData(a) => gen_data(a, &mut out),
    };
    out.finish(cmd.name(), cmd.snapshot(), result.as_ref().err())?;
    result
}

fn exec(common: &CommonArgs) -> Execution {
    if common.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn rule(r: Rule) -> AggregationRule {
    match r {
        Rule::Majority => AggregationRule::Majority,
        Rule::Unanimous => AggregationRule::UnanimousOrAbstain,
    }
}

fn check_grid(name: &str, grid: &[f64]) -> Result<(), CliError> {
    if grid.is_empty() {
        return Err(CliError::Usage(format!("{name} must not be empty")));
    }
    if grid.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(CliError::Usage(format!("{name} values must be finite and nonnegative")));
    }
    Ok(())
}

fn load(data: &DataArgs, common: &CommonArgs, out: &mut OutputDir) -> Result<Split, CliError> {
    let split = dataset::load(data, RngSeed(common.seed))?;
    out.record_seed("dictionary", RngSeed(common.seed).derive(dataset::DICT_STREAM).0);
    out.stage("load");
    Ok(split)
}

fn dual_classifier<'d>(dict: &'d dualcert::data::Dictionary, a: &DualArgs) -> Result<DualClassifier<'d>, CliError> {
    Ok(DualClassifier::new(dict, a.lambda, rule(a.rule))?.with_tau(a.tau))
}

fn smoothing_config(s: &SmoothArgs, common: &CommonArgs, inner: Execution) -> Result<SmoothingConfig, CliError> {
    let cfg = SmoothingConfig {
        sigma: s.sigma,
        n0: s.n0,
        n: s.n,
        confidence: ConfidenceLevel::new(s.confidence).map_err(|e| CliError::Usage(e.to_string()))?,
        seed: RngSeed(common.seed).derive(SMOOTHING_STREAM),
        execution: inner,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

#[derive(Serialize)]
struct PredictionRow {
    index: usize,
    label: usize,
    predicted: Option<usize>,
    correct: bool,
    active_size: usize,
    near_degenerate: bool,
    certified: bool,
    radius: Option<f64>,
}

#[derive(Serialize)]
struct CertificateEntry {
    index: usize,
    certificate: Option<CertificateDocument>,
    radius: Option<ExactRadiusResult>,
}

#[derive(Serialize)]
struct CertifySummary {
    n_points: usize,
    dict_size: usize,
    lambda: f64,
    clean_accuracy: f64,
    abstain_rate: f64,
    mean_active_size: f64,
    certified_fraction: f64,
    near_degenerate: usize,
}

fn certify(a: &CertifyArgs, out: &mut OutputDir) -> Result<(), CliError> {
    let split = load(&a.data, &a.common, out)?;
    let dict = dataset::dictionary(&a.data, &split.train, RngSeed(a.common.seed))?;
    let clf = dual_classifier(&dict, &a.dual)?;
    let test = &split.test;
    let results = try_map_indexed(exec(&a.common), test.len(), |i| -> Result<_, CliError> {
        let p = clf.predict(test.point(i))?;
        let radius = match (&p.certificate, a.radius) {
            (Some(c), true) => match c.exact_l2_radius(DEFAULT_MAX_VERTICES) {
                Ok(r) => Some(r),
                Err(e) => {
                    log::warn!("point {i}: exact radius skipped: {e}");
                    None
                }
            },
            _ => None,
        };
        let label = test.label(i);
        let row = PredictionRow {
            index: i,
            label,
            predicted: p.prediction.label,
            correct: p.prediction.label == Some(label),
            active_size: p.prediction.active_size,
            near_degenerate: p.active.near_degenerate,
            certified: p.certificate.is_some(),
            radius: radius.as_ref().map(|r| r.r0),
        };
        let entry = CertificateEntry {
            index: i,
            certificate: p.certificate.as_ref().map(|c| c.to_document(a.include_inequalities)),
            radius,
        };
        Ok((row, entry))
    })?;
    out.stage("classify");
    let (rows, entries): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let n = rows.len().max(1) as f64;
    let summary = CertifySummary {
        n_points: rows.len(),
        dict_size: dict.len(),
        lambda: a.dual.lambda,
        clean_accuracy: rows.iter().filter(|r| r.correct).count() as f64 / n,
        abstain_rate: rows.iter().filter(|r| r.predicted.is_none()).count() as f64 / n,
        mean_active_size: mean(rows.iter().map(|r| r.active_size as f64)),
        certified_fraction: rows.iter().filter(|r| r.certified).count() as f64 / n,
        near_degenerate: rows.iter().filter(|r| r.near_degenerate).count(),
    };
    out.write_csv("predictions.csv", &rows)?;
    out.write_json("certificates.json", &entries)?;
    out.write_json("summary.json", &summary)?;
    out.stage("write");
    Ok(())
}

/// Builds the attack target and runs `f` on it.
fn with_target<R>(
    target: Target,
    dual: &DualClassifier<'_>,
    split: &Split,
    smooth: Option<SmoothingConfig>,
    f: impl FnOnce(&dyn ScoredClassifier) -> Result<R, CliError>,
) -> Result<R, CliError> {
    let nearest = || {
        split
            .model
            .as_ref()
            .map(NearestSubspace::new)
            .ok_or_else(|| CliError::Usage("nearest-subspace targets need --dataset uos".into()))
    };
    let smooth = || smooth.ok_or_else(|| CliError::Usage("smoothed targets are not available for this command".into()));
    match target {
        Target::Dual => f(dual),
        Target::Nearest => f(&nearest()?),
        Target::SmoothedNearest => {
            let base = nearest()?;
            f(&Smoothed::new(&base, smooth()?)?)
        }
        Target::SmoothedDual => f(&Smoothed::new(dual, smooth()?)?),
    }
}

#[derive(Serialize)]
struct AttackRow {
    index: usize,
    epsilon: f64,
    label: usize,
    clean_correct: bool,
    certified: bool,
    robust: bool,
    final_l2: f64,
}

#[derive(Serialize)]
struct ProjCurveRow {
    epsilon: f64,
    target_accuracy: f64,
    dual_accuracy: f64,
    n_points: usize,
}

fn attack_proj(a: &AttackProjArgs, out: &mut OutputDir) -> Result<(), CliError> {
    check_grid("--eps-grid", &a.eps_grid)?;
    if a.steps == 0 {
        return Err(CliError::Usage("--steps must be at least 1".into()));
    }
    let split = load(&a.data, &a.common, out)?;
    let dict = dataset::dictionary(&a.data, &split.train, RngSeed(a.common.seed))?;
    let dual = dual_classifier(&dict, &a.dual)?;
    let smooth = smoothing_config(&a.smooth, &a.common, Execution::Sequential)?;
    let attack_seed = RngSeed(a.common.seed).derive(ATTACK_STREAM);
    out.record_seed("attack", attack_seed.0);
    out.record_seed("smoothing", smooth.seed.0);
    let test = &split.test;
    let per_point = with_target(a.target, &dual, &split, Some(smooth), |target| {
        try_map_indexed(exec(&a.common), test.len(), |i| -> Result<_, CliError> {
            let (x, y) = (test.point(i), test.label(i));
            let p = dual.predict(x)?;
            let dual_correct = p.prediction.label == Some(y);
            let clean = target.classify(x) == Some(y);
            let mut rows = Vec::with_capacity(a.eps_grid.len());
            for (e, &eps) in a.eps_grid.iter().enumerate() {
                let (robust, l2) = match (&p.certificate, clean, eps > 0.0) {
                    (_, false, _) => (false, 0.0),
                    (_, true, false) => (true, 0.0),
                    // no certificate: the restricted attack is undefined, count as not robust
                    (None, true, true) => (false, 0.0),
                    (Some(cert), true, true) => {
                        let cfg = AttackConfig {
                            steps: a.steps,
                            step_size: 2.5 * eps / a.steps as f64,
                            ..AttackConfig::new(eps, attack_seed.derive(i as u64).derive(e as u64))
                        };
                        let r = pgd_in_certificate(target, x, y, cert, &cfg)?;
                        (!r.success, r.final_l2)
                    }
                };
                rows.push(AttackRow {
                    index: i,
                    epsilon: eps,
                    label: y,
                    clean_correct: clean,
                    certified: p.certificate.is_some(),
                    robust,
                    final_l2: l2,
                });
            }
            Ok((dual_correct, rows))
        })
    })?;
    out.stage("attack");
    let n = per_point.len();
    let dual_acc = per_point.iter().filter(|p| p.0).count() as f64 / n.max(1) as f64;
    let curve: Vec<ProjCurveRow> = a
        .eps_grid
        .iter()
        .enumerate()
        .map(|(e, &eps)| ProjCurveRow {
            epsilon: eps,
            target_accuracy: per_point.iter().filter(|p| p.1[e].robust).count() as f64 / n.max(1) as f64,
            dual_accuracy: dual_acc,
            n_points: n,
        })
        .collect();
    let rows: Vec<AttackRow> = per_point.into_iter().flat_map(|p| p.1).collect();
    out.write_csv("attacks.csv", &rows)?;
    out.write_csv("curve.csv", &curve)?;
    if a.common.svg {
        out.write_svg(
            "curve.svg",
            &LinePlot {
                title: "Robust accuracy under certificate-restricted PGD".into(),
                x_label: "epsilon".into(),
                y_label: "accuracy".into(),
                series: vec![
                    ("target".into(), curve.iter().map(|r| (r.epsilon, r.target_accuracy)).collect()),
                    ("dual".into(), curve.iter().map(|r| (r.epsilon, r.dual_accuracy)).collect()),
                ],
            },
        )?;
    }
    out.stage("write");
    Ok(())
}

#[derive(Serialize)]
struct DistanceRow {
    index: usize,
    label: usize,
    predicted: Option<usize>,
    final_l2: f64,
}

#[derive(Serialize)]
struct BbCurveRow {
    epsilon: f64,
    robust_accuracy: f64,
    n_points: usize,
}

fn attack_bb(a: &AttackBbArgs, out: &mut OutputDir) -> Result<(), CliError> {
    check_grid("--eps-grid", &a.eps_grid)?;
    if a.steps == 0 {
        return Err(CliError::Usage("--steps must be at least 1".into()));
    }
    let split = load(&a.data, &a.common, out)?;
    let dict = dataset::dictionary(&a.data, &split.train, RngSeed(a.common.seed))?;
    let dual = dual_classifier(&dict, &a.dual)?;
    let attack_seed = RngSeed(a.common.seed).derive(ATTACK_STREAM);
    out.record_seed("attack", attack_seed.0);
    let eps_max = a.eps_grid.iter().cloned().fold(0.0, f64::max);
    let test = &split.test;
    let rows = with_target(a.target, &dual, &split, None, |target| {
        try_map_indexed(exec(&a.common), test.len(), |i| -> Result<_, CliError> {
            let (x, y) = (test.point(i), test.label(i));
            let predicted = target.classify(x);
            let final_l2 = if predicted == Some(y) {
                let cfg = AttackConfig {
                    steps: a.steps,
                    ..AttackConfig::new(eps_max, attack_seed.derive(i as u64))
                };
                boundary_attack(target, x, y, &cfg)?.final_l2
            } else {
                0.0
            };
            Ok(DistanceRow {
                index: i,
                label: y,
                predicted,
                final_l2,
            })
        })
    })?;
    out.stage("attack");
    let n = rows.len();
    let curve: Vec<BbCurveRow> = a
        .eps_grid
        .iter()
        .map(|&eps| BbCurveRow {
            epsilon: eps,
            robust_accuracy: rows.iter().filter(|r| r.predicted == Some(r.label) && r.final_l2 > eps).count() as f64 / n.max(1) as f64,
            n_points: n,
        })
        .collect();
    out.write_csv("distances.csv", &rows)?;
    out.write_csv("curve.csv", &curve)?;
    if a.common.svg {
        out.write_svg(
            "curve.svg",
            &LinePlot {
                title: "Robust accuracy under the boundary attack".into(),
                x_label: "epsilon".into(),
                y_label: "accuracy".into(),
                series: vec![("target".into(), curve.iter().map(|r| (r.epsilon, r.robust_accuracy)).collect())],
            },
        )?;
    }
    out.stage("write");
    Ok(())
}

#[derive(Serialize)]
struct SmoothRow {
    index: usize,
    label: usize,
    predicted: Option<usize>,
    p_lower: f64,
    radius: f64,
}

fn rs_curve(a: &RsCurveArgs, out: &mut OutputDir) -> Result<(), CliError> {
    check_grid("--eps-grid", &a.eps_grid)?;
    let split = load(&a.data, &a.common, out)?;
    let dict = dataset::dictionary(&a.data, &split.train, RngSeed(a.common.seed))?;
    let dual = dual_classifier(&dict, &a.dual)?;
    let cfg = smoothing_config(&a.smooth, &a.common, exec(&a.common))?;
    out.record_seed("smoothing", cfg.seed.0);
    let certs = certify_dataset(&dual, &split.test, &cfg)?;
    out.stage("certify");
    let curve = curve_from_certificates(&certs, split.test.labels(), &a.eps_grid);
    let rows: Vec<SmoothRow> = certs
        .iter()
        .enumerate()
        .map(|(i, c)| SmoothRow {
            index: i,
            label: split.test.label(i),
            predicted: c.predicted,
            p_lower: c.p_lower,
            radius: c.radius,
        })
        .collect();
    out.write_csv("certificates.csv", &rows)?;
    out.write_csv("curve.csv", &curve)?;
    if a.common.svg {
        out.write_svg(
            "curve.svg",
            &LinePlot {
                title: "Certified accuracy of the smoothed dual classifier".into(),
                x_label: "radius".into(),
                y_label: "certified accuracy".into(),
                series: vec![("smoothed dual".into(), curve.iter().map(|r| (r.epsilon, r.certified_accuracy)).collect())],
            },
        )?;
    }
    out.stage("write");
    Ok(())
}

fn sphere(a: &SphereArgs, out: &mut OutputDir) -> Result<(), CliError> {
    let psi = match a.psi {
        PsiArg::Constant => Psi::Constant,
        PsiArg::Exp => Psi::ExpDecay,
    };
    let params = SphereExampleParams::new(a.n, a.theta0, psi).map_err(|e| CliError::Usage(e.to_string()))?;
    let grid: Vec<f64> = if a.eps_grid.is_empty() {
        (0..=314).map(|i| i as f64 * 0.01).collect()
    } else {
        a.eps_grid.clone()
    };
    check_grid("--eps-grid", &grid)?;
    let rows = sphere_risk_curve(&params, &grid)?;
    out.stage("evaluate");
    out.write_csv("sphere.csv", &rows)?;
    if a.common.svg {
        out.write_svg(
            "sphere.svg",
            &LinePlot {
                title: format!("Sphere example, n = {}, theta0 = {}", a.n, a.theta0),
                x_label: "epsilon (geodesic)".into(),
                y_label: "robust risk".into(),
                series: vec![
                    ("risk".into(), rows.iter().map(|r| (r.epsilon, r.risk)).collect()),
                    ("class 1 term".into(), rows.iter().map(|r| (r.epsilon, r.class1_term)).collect()),
                    ("class 2 term".into(), rows.iter().map(|r| (r.epsilon, r.class2_term)).collect()),
                ],
            },
        )?;
    }
    out.stage("write");
    Ok(())
}

#[derive(Serialize)]
struct CubeRow {
    n: usize,
    alpha: f64,
    epsilon: f64,
    gamma: f64,
    bound: f64,
    estimate: f64,
    clean_errors: usize,
    attack_successes: usize,
    n_points: usize,
    conc_c: f64,
    conc_epsilon: f64,
    conc_delta: f64,
    strong_epsilon: f64,
    strong_delta: f64,
    strong_gamma: f64,
}

fn cube(a: &CubeArgs, out: &mut OutputDir) -> Result<(), CliError> {
    check_grid("--alpha-grid", &a.alpha_grid)?;
    check_grid("--eps-grid", &a.eps_grid)?;
    if a.samples < 2 {
        return Err(CliError::Usage("--samples must be at least 2".into()));
    }
    let seed = RngSeed(a.common.seed).derive(CUBE_STREAM);
    out.record_seed("cube", seed.0);
    let mut rows = Vec::new();
    for &alpha in &a.alpha_grid {
        for &eps in &a.eps_grid {
            let p = CubeExampleParams::new(a.n, alpha, eps).map_err(|e| CliError::Usage(e.to_string()))?;
            let data = sample_cube(&p, a.samples / 2, seed.derive(rows.len() as u64))?;
            let clf = CubeClassifier::new(p);
            let est = estimate_robust_risk(&clf, &data, |_, x, y| Ok(cube_worst_case_attack(&p, x, y)), exec(&a.common))?;
            let (c, s) = cube_concentration(&p);
            rows.push(CubeRow {
                n: a.n,
                alpha,
                epsilon: eps,
                gamma: p.gamma(),
                bound: cube_risk_bound(&p),
                estimate: est.risk,
                clean_errors: est.clean_errors,
                attack_successes: est.attack_successes,
                n_points: est.n_points,
                conc_c: c.c,
                conc_epsilon: c.epsilon,
                conc_delta: c.delta,
                strong_epsilon: s.epsilon,
                strong_delta: s.delta,
                strong_gamma: s.gamma,
            });
        }
    }
    out.stage("evaluate");
    out.write_csv("cube.csv", &rows)?;
    if a.common.svg {
        let series = a
            .alpha_grid
            .iter()
            .flat_map(|&alpha| {
                let pick = |f: fn(&CubeRow) -> f64| rows.iter().filter(|r| r.alpha == alpha).map(|r| (r.epsilon, f(r))).collect::<Vec<_>>();
                [(format!("bound, alpha = {alpha}"), pick(|r| r.bound)), (format!("estimate, alpha = {alpha}"), pick(|r| r.estimate))]
            })
            .collect();
        out.write_svg(
            "cube.svg",
            &LinePlot {
                title: format!("Cube example, n = {}", a.n),
                x_label: "epsilon".into(),
                y_label: "robust risk".into(),
                series,
            },
        )?;
    }
    out.stage("write");
    Ok(())
}

fn concentration(a: &ConcentrationArgs, out: &mut OutputDir) -> Result<(), CliError> {
    let split = load(&a.data, &a.common, out)?;
    let grid = if a.m_grid.is_empty() { vec![1, 2, 5, 10, 20, 50, 100] } else { a.m_grid.clone() };
    if grid.contains(&0) {
        return Err(CliError::Usage("--m-grid values must be at least 1".into()));
    }
    let rows = empirical_concentration_curve(&split.test, &grid, a.within_class)?;
    out.stage("evaluate");
    out.write_csv("concentration.csv", &rows)?;
    if a.common.svg {
        out.write_svg(
            "concentration.svg",
            &LinePlot {
                title: "Greedy empirical concentration".into(),
                x_label: "separation epsilon_m".into(),
                y_label: "mass 1 - delta_m".into(),
                series: vec![("greedy".into(), rows.iter().map(|r| (r.epsilon, r.mass)).collect())],
            },
        )?;
    }
    out.stage("write");
    Ok(())
}

fn write_dataset(out: &mut OutputDir, name: &str, data: &dualcert::data::LabeledDataset) -> Result<(), CliError> {
    let (header, rows) = dataset::dataset_rows(data);
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Runtime(format!("csv: {e}"));
    w.write_record(&header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Runtime(format!("csv: {e}")))?;
    out.write_bytes(name, &bytes)
}

fn gen_data(a: &GenDataArgs, out: &mut OutputDir) -> Result<(), CliError> {
    if a.train_per_class == 0 || a.test_per_class == 0 {
        return Err(CliError::Usage("--train-per-class and --test-per-class must be at least 1".into()));
    }
    let seed = RngSeed(a.common.seed);
    let (train, test) = match a.kind {
        GenKind::Uos => {
            let s = dataset::uos_split(a.ambient_dim, a.subspace_dim, a.classes, a.gamma, a.train_per_class, a.test_per_class, seed)?;
            (s.train, s.test)
        }
        GenKind::Cube => {
            let p = CubeExampleParams::new(a.ambient_dim, a.alpha, a.eps).map_err(|e| CliError::Usage(e.to_string()))?;
            let train = dataset::interleave(&sample_cube(&p, a.train_per_class, seed.derive(GEN_TRAIN_STREAM))?);
            let test = dataset::interleave(&sample_cube(&p, a.test_per_class, seed.derive(GEN_TEST_STREAM))?);
            (train, test)
        }
    };
    out.stage("generate");
    write_dataset(out, "train.csv", &train)?;
    write_dataset(out, "test.csv", &test)?;
    out.stage("write");
    Ok(())
}
