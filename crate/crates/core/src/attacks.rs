//! Empirical attacks and robust-risk estimation.
//!
//! `pgd_in_certificate` keeps every iterate inside `B(x, eps)` and the
//! closure of the certificate of `x`. `boundary_attack` only queries labels.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::certificate::{CertificatePolyhedron, DEFAULT_MEMBERSHIP_TOL, DEFAULT_PROJECTION_TOL};
use crate::classifier::{Classifier, ScoredClassifier};
use crate::data::LabeledDataset;
use crate::error::{arg, Result};
use crate::linalg::{add, axpy, dist, norm, project_ball, scale, sub};
use crate::numerics::{gaussian_vec, RngSeed};
use crate::par::{try_map_indexed, Execution};

pub const DEFAULT_STEPS: usize = 20;
/// Alternations of certificate and ball projections per step.
pub const MAX_ALTERNATIONS: usize = 50;
pub const BINARY_SEARCH_TOL: f64 = 1e-4;
/// Iterates are pulled this fraction of the way back toward the anchor.
///
/// On the boundary of the closure, extra dual constraints can become tight
/// and the active set can grow; the open certificate excludes those points.
pub const DEFAULT_INTERIOR_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub epsilon: f64,
    pub steps: usize,
    pub step_size: f64,
    pub seed: RngSeed,
    pub interior_margin: f64,
}

impl AttackConfig {
    /// `T = 20` steps of size `2.5 eps / T`.
    pub fn new(epsilon: f64, seed: RngSeed) -> Self {
        AttackConfig {
            epsilon,
            steps: DEFAULT_STEPS,
            step_size: 2.5 * epsilon / DEFAULT_STEPS as f64,
            seed,
            interior_margin: DEFAULT_INTERIOR_MARGIN,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) {
            return arg(format!("epsilon must be nonnegative, got {}", self.epsilon));
        }
        if self.steps == 0 {
            return arg("attack needs at least one step");
        }
        if !(self.step_size >= 0.0) || !self.step_size.is_finite() {
            return arg(format!("step size must be nonnegative and finite, got {}", self.step_size));
        }
        if !(0.0..1.0).contains(&self.interior_margin) {
            return arg(format!("interior margin must lie in [0,1), got {}", self.interior_margin));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackStep {
    pub step: usize,
    pub l2: f64,
    pub label: Option<usize>,
    pub in_certificate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub adversarial_x: Vec<f64>,
    pub success: bool,
    pub final_l2: f64,
    /// Every reported iterate passed the membership check.
    pub in_certificate: bool,
    pub transcript: Vec<AttackStep>,
}

/// Projected gradient ascent on the margin loss, restricted to
/// `B(x, eps) ∩ C(x)`.
///
/// Each step moves along the normalized loss gradient, projects onto the
/// ball, then alternates certificate and ball projections. The last
/// projection is onto the ball centred at the anchor, which lies in `C`, so
/// the iterate stays on a segment inside `C` by convexity.
pub fn pgd_in_certificate<T: ScoredClassifier + ?Sized>(
    target: &T,
    x: &[f64],
    y: usize,
    cert: &CertificatePolyhedron<'_>,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    cfg.validate()?;
    if x.len() != cert.dim() || dist(x, cert.anchor()) > 1e-12 * (1.0 + norm(x)) {
        return arg("certificate is not anchored at the attacked point");
    }
    let proj = cert.projector(DEFAULT_PROJECTION_TOL)?;
    let mut rng = cfg.seed.rng();
    let mut cur = x.to_vec();
    let mut label = target.classify(&cur);
    let mut transcript = vec![AttackStep {
        step: 0,
        l2: 0.0,
        label,
        in_certificate: true,
    }];
    let mut all_inside = true;
    for step in 1..=cfg.steps {
        if label != Some(y) || cfg.step_size == 0.0 || cfg.epsilon == 0.0 {
            break;
        }
        let mut g = target.margin_gradient(&cur, y);
        let gn = norm(&g);
        if gn > 0.0 && gn.is_finite() {
            g.iter_mut().for_each(|v| *v /= gn);
        } else {
            g = gaussian_vec(&mut rng, x.len(), 1.0);
            let n = norm(&g);
            g.iter_mut().for_each(|v| *v /= n);
        }
        let mut b = project_ball(&add(&cur, &scale(cfg.step_size, &g)), x, cfg.epsilon);
        for _ in 0..MAX_ALTERNATIONS {
            let p = cert.project_with(&proj, &b)?.point;
            let q = project_ball(&p, x, cfg.epsilon);
            let done = dist(&p, &q) <= 1e-10;
            b = q;
            if done {
                break;
            }
        }
        cur = add(x, &scale(1.0 - cfg.interior_margin, &sub(&b, x)));
        let inside = cert.membership_with(&proj, &cur, DEFAULT_MEMBERSHIP_TOL)?.inside;
        all_inside &= inside;
        label = target.classify(&cur);
        transcript.push(AttackStep {
            step,
            l2: dist(&cur, x),
            label,
            in_certificate: inside,
        });
    }
    Ok(AttackResult {
        final_l2: dist(&cur, x),
        success: label != Some(y),
        adversarial_x: cur,
        in_certificate: all_inside,
        transcript,
    })
}

const INIT_TRIES: usize = 100;
const PROBES: usize = 50;

fn bisect_boundary<F: Fn(&[f64]) -> bool>(is_adv: &F, x: &[f64], adv: &[f64]) -> Vec<f64> {
    let seg = sub(adv, x);
    let len = norm(&seg);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while (hi - lo) * len > BINARY_SEARCH_TOL {
        let mid = 0.5 * (lo + hi);
        if is_adv(&add(x, &scale(mid, &seg))) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    add(x, &scale(hi, &seg))
}

fn unit<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    let v = gaussian_vec(rng, dim, 1.0);
    let n = norm(&v);
    v.iter().map(|c| c / n).collect()
}

/// Decision-based attack: random search for a misclassified start, binary
/// search toward `x`, then `T` rounds of sign-probe gradient estimation at
/// the boundary, each followed by a new binary search. Success needs a
/// misclassified point within `eps`.
pub fn boundary_attack<T: Classifier + ?Sized>(target: &T, x: &[f64], y: usize, cfg: &AttackConfig) -> Result<AttackResult> {
    cfg.validate()?;
    let is_adv = |z: &[f64]| target.classify(z) != Some(y);
    let mut rng = cfg.seed.rng();
    let failure = |transcript| AttackResult {
        adversarial_x: x.to_vec(),
        success: false,
        final_l2: f64::INFINITY,
        in_certificate: false,
        transcript,
    };
    if is_adv(x) {
        return Ok(AttackResult {
            adversarial_x: x.to_vec(),
            success: true,
            final_l2: 0.0,
            in_certificate: false,
            transcript: vec![AttackStep {
                step: 0,
                l2: 0.0,
                label: target.classify(x),
                in_certificate: false,
            }],
        });
    }
    let scale0 = norm(x).max(1.0);
    let start = (0..INIT_TRIES).find_map(|k| {
        let r = 1e-3 * scale0 * 1.15f64.powi(k as i32);
        let z = add(x, &scale(r, &unit(&mut rng, x.len())));
        is_adv(&z).then_some(z)
    });
    let Some(start) = start else {
        return Ok(failure(Vec::new()));
    };
    let mut best = bisect_boundary(&is_adv, x, &start);
    let mut transcript = vec![AttackStep {
        step: 0,
        l2: dist(&best, x),
        label: target.classify(&best),
        in_certificate: false,
    }];
    for round in 1..=cfg.steps {
        let d = dist(&best, x);
        let delta = (1e-2 * d).max(1e-6);
        let probes: Vec<(Vec<f64>, f64)> = (0..PROBES)
            .map(|_| {
                let u = unit(&mut rng, x.len());
                let phi = if is_adv(&add(&best, &scale(delta, &u))) { 1.0 } else { -1.0 };
                (u, phi)
            })
            .collect();
        let mean = probes.iter().map(|p| p.1).sum::<f64>() / PROBES as f64;
        let mut g = vec![0.0; x.len()];
        for (u, phi) in &probes {
            let w = if mean.abs() < 1.0 { phi - mean } else { *phi };
            axpy(w, u, &mut g);
        }
        let gn = norm(&g);
        if gn > 0.0 {
            let mut xi = d / (round as f64).sqrt();
            let mut cand = None;
            for _ in 0..10 {
                let z = add(&best, &scale(xi / gn, &g));
                if is_adv(&z) {
                    cand = Some(z);
                    break;
                }
                xi *= 0.5;
            }
            if let Some(z) = cand {
                let b = bisect_boundary(&is_adv, x, &z);
                if dist(&b, x) < d {
                    best = b;
                }
            }
        }
        transcript.push(AttackStep {
            step: round,
            l2: dist(&best, x),
            label: target.classify(&best),
            in_certificate: false,
        });
    }
    let final_l2 = dist(&best, x);
    Ok(AttackResult {
        success: final_l2 <= cfg.epsilon,
        adversarial_x: best,
        final_l2,
        in_certificate: false,
        transcript,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustRiskEstimate {
    pub risk: f64,
    pub clean_errors: usize,
    pub attack_successes: usize,
    pub n_points: usize,
}

/// Fraction of points that are misclassified (abstain included) or for which
/// `attack(i, x_i, y_i)` finds a misclassified point within budget. This is a
/// lower bound on the true robust risk.
pub fn estimate_robust_risk<C, A>(classifier: &C, data: &LabeledDataset, attack: A, exec: Execution) -> Result<RobustRiskEstimate>
where
    C: Classifier + ?Sized,
    A: Fn(usize, &[f64], usize) -> Result<AttackResult> + Sync + Send,
{
    if data.is_empty() {
        return arg("robust risk needs at least one point");
    }
    let outcomes = try_map_indexed(exec, data.len(), |i| {
        let (x, y) = (data.point(i), data.label(i));
        if classifier.classify(x) != Some(y) {
            return Ok::<_, crate::Error>((true, false));
        }
        Ok((false, attack(i, x, y)?.success))
    })?;
    let clean_errors = outcomes.iter().filter(|o| o.0).count();
    let attack_successes = outcomes.iter().filter(|o| o.1).count();
    Ok(RobustRiskEstimate {
        risk: (clean_errors + attack_successes) as f64 / data.len() as f64,
        clean_errors,
        attack_successes,
        n_points: data.len(),
    })
}
