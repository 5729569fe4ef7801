//! Randomized smoothing: Gaussian majority vote and its l2 certificate.
//!
//! Class selection uses `n0` noise draws and the probability bound uses `n`
//! fresh draws, so the one-sided Clopper-Pearson bound stays valid. Draw `i`
//! of a stream uses the seed `stream.derive(i)`, which makes every tally
//! independent of how the draws are scheduled.

use serde::{Deserialize, Serialize};

use crate::classifier::{best_other, Classifier, ScoredClassifier};
use crate::data::LabeledDataset;
use crate::error::{arg, Result};
use crate::linalg::{add, axpy, sub};
use crate::numerics::{clopper_pearson_lower, gaussian_sample, inv_norm_cdf, ConfidenceLevel, RngSeed};
use crate::par::{map_indexed, try_map_indexed, Execution};

pub const DEFAULT_SIGMA: f64 = 0.02;
pub const DEFAULT_SAMPLES: usize = 100;
pub const DEFAULT_CONFIDENCE: f64 = 0.999;

const SELECTION_STREAM: u64 = 0;
const ESTIMATION_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    pub sigma: f64,
    pub n0: usize,
    pub n: usize,
    pub confidence: ConfidenceLevel,
    pub seed: RngSeed,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        SmoothingConfig {
            sigma: DEFAULT_SIGMA,
            n0: DEFAULT_SAMPLES,
            n: DEFAULT_SAMPLES,
            confidence: ConfidenceLevel::new(DEFAULT_CONFIDENCE).expect("valid default"),
            seed: RngSeed(0),
            execution: Execution::default(),
        }
    }
}

impl SmoothingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return arg(format!("sigma must be positive, got {}", self.sigma));
        }
        if self.n0 == 0 || self.n == 0 {
            return arg("n0 and n must both be at least 1");
        }
        Ok(())
    }

    /// Same settings with the seed of the `i`-th point of a batch.
    pub fn for_point(&self, i: usize) -> SmoothingConfig {
        SmoothingConfig {
            seed: self.seed.derive(i as u64),
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingCertificate {
    pub predicted: Option<usize>,
    pub p_lower: f64,
    pub radius: f64,
}

fn noisy<B: Classifier + ?Sized>(base: &B, x: &[f64], sigma: f64, seed: RngSeed, i: usize) -> Option<usize> {
    let noise = gaussian_sample(seed.derive(i as u64), x.len(), sigma);
    base.classify(&add(x, &noise))
}

/// Per-class counts of `base` over `count` noisy copies of `x`.
pub fn vote_counts<B: Classifier + ?Sized>(
    base: &B,
    x: &[f64],
    sigma: f64,
    count: usize,
    seed: RngSeed,
    exec: Execution,
) -> Vec<u64> {
    let labels = map_indexed(exec, count, |i| noisy(base, x, sigma, seed, i));
    let mut counts = vec![0u64; base.num_classes()];
    for l in labels.into_iter().flatten() {
        counts[l] += 1;
    }
    counts
}

fn top_class(counts: &[u64]) -> Option<usize> {
    let mut best = 0;
    for k in 1..counts.len() {
        if counts[k] > counts[best] {
            best = k;
        }
    }
    (counts.get(best).copied().unwrap_or(0) > 0).then_some(best)
}

/// Majority class over `n0` noisy evaluations.
pub fn smooth_predict<B: Classifier + ?Sized>(base: &B, x: &[f64], cfg: &SmoothingConfig) -> Result<Option<usize>> {
    cfg.validate()?;
    let counts = vote_counts(base, x, cfg.sigma, cfg.n0, cfg.seed.derive(SELECTION_STREAM), cfg.execution);
    Ok(top_class(&counts))
}

/// Radius `sigma * Phi^{-1}(p_lower)`, or abstain with radius 0 when
/// `p_lower <= 1/2`.
pub fn radius_from_bound(predicted: Option<usize>, p_lower: f64, sigma: f64) -> Result<SmoothingCertificate> {
    if predicted.is_none() || p_lower <= 0.5 {
        return Ok(SmoothingCertificate {
            predicted: None,
            p_lower,
            radius: 0.0,
        });
    }
    let radius = if p_lower >= 1.0 { f64::INFINITY } else { sigma * inv_norm_cdf(p_lower)? };
    Ok(SmoothingCertificate {
        predicted,
        p_lower,
        radius,
    })
}

pub fn smooth_certify<B: Classifier + ?Sized>(base: &B, x: &[f64], cfg: &SmoothingConfig) -> Result<SmoothingCertificate> {
    let selected = smooth_predict(base, x, cfg)?;
    let Some(class) = selected else {
        return radius_from_bound(None, 0.0, cfg.sigma);
    };
    let counts = vote_counts(base, x, cfg.sigma, cfg.n, cfg.seed.derive(ESTIMATION_STREAM), cfg.execution);
    let p_lower = clopper_pearson_lower(counts[class], cfg.n as u64, cfg.confidence)?;
    radius_from_bound(Some(class), p_lower, cfg.sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epsilon: f64,
    pub certified_accuracy: f64,
    pub n_points: usize,
}

/// Certifies every point (point `i` uses `cfg.for_point(i)`).
pub fn certify_dataset<B: Classifier + ?Sized>(
    base: &B,
    data: &LabeledDataset,
    cfg: &SmoothingConfig,
) -> Result<Vec<SmoothingCertificate>> {
    cfg.validate()?;
    let inner = SmoothingConfig {
        execution: Execution::Sequential,
        ..*cfg
    };
    try_map_indexed(cfg.execution, data.len(), |i| smooth_certify(base, data.point(i), &inner.for_point(i)))
}

/// Fraction of points certified correct at radius at least `eps`.
pub fn curve_from_certificates(certs: &[SmoothingCertificate], labels: &[usize], radii: &[f64]) -> Vec<CurvePoint> {
    radii
        .iter()
        .map(|&epsilon| {
            let ok = certs
                .iter()
                .zip(labels)
                .filter(|(c, y)| c.predicted == Some(**y) && c.radius >= epsilon)
                .count();
            CurvePoint {
                epsilon,
                certified_accuracy: if labels.is_empty() { 0.0 } else { ok as f64 / labels.len() as f64 },
                n_points: labels.len(),
            }
        })
        .collect()
}

pub fn certified_accuracy_curve<B: Classifier + ?Sized>(
    base: &B,
    data: &LabeledDataset,
    cfg: &SmoothingConfig,
    radii: &[f64],
) -> Result<Vec<CurvePoint>> {
    if data.is_empty() {
        return arg("certified accuracy needs at least one point");
    }
    let certs = certify_dataset(base, data, cfg)?;
    Ok(curve_from_certificates(&certs, data.labels(), radii))
}

/// The smoothed classifier as a classifier in its own right.
///
/// Its scores are the base scores averaged over the `n0` selection draws,
/// and its margin gradient is the average per-draw score-gap gradient. The
/// draws are fixed by the seed, so both are deterministic functions of `x`.
pub struct Smoothed<'b, B: ?Sized> {
    base: &'b B,
    cfg: SmoothingConfig,
}

impl<'b, B: Classifier + ?Sized> Smoothed<'b, B> {
    pub fn new(base: &'b B, cfg: SmoothingConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Smoothed { base, cfg })
    }

    pub fn config(&self) -> &SmoothingConfig {
        &self.cfg
    }

    fn noise(&self, dim: usize, i: usize) -> Vec<f64> {
        gaussian_sample(self.cfg.seed.derive(SELECTION_STREAM).derive(i as u64), dim, self.cfg.sigma)
    }
}

impl<B: Classifier + ?Sized> Classifier for Smoothed<'_, B> {
    fn num_classes(&self) -> usize {
        self.base.num_classes()
    }

    fn classify(&self, x: &[f64]) -> Option<usize> {
        smooth_predict(self.base, x, &self.cfg).ok().flatten()
    }
}

impl<B: ScoredClassifier + ?Sized> ScoredClassifier for Smoothed<'_, B> {
    fn scores(&self, x: &[f64]) -> Vec<f64> {
        let per = map_indexed(self.cfg.execution, self.cfg.n0, |i| self.base.scores(&add(x, &self.noise(x.len(), i))));
        let mut s = vec![0.0; self.num_classes()];
        for v in &per {
            axpy(1.0 / self.cfg.n0 as f64, v, &mut s);
        }
        s
    }

    fn score_gradient(&self, x: &[f64], class: usize) -> Vec<f64> {
        let per = map_indexed(self.cfg.execution, self.cfg.n0, |i| {
            self.base.score_gradient(&add(x, &self.noise(x.len(), i)), class)
        });
        let mut g = vec![0.0; x.len()];
        for v in &per {
            axpy(1.0 / self.cfg.n0 as f64, v, &mut g);
        }
        g
    }

    fn margin_gradient(&self, x: &[f64], y: usize) -> Vec<f64> {
        let per = map_indexed(self.cfg.execution, self.cfg.n0, |i| {
            let xi = add(x, &self.noise(x.len(), i));
            let s = self.base.scores(&xi);
            match best_other(&s, y) {
                Some(r) => sub(&self.base.score_gradient(&xi, r), &self.base.score_gradient(&xi, y)),
                None => vec![0.0; x.len()],
            }
        });
        let mut g = vec![0.0; x.len()];
        for v in &per {
            axpy(1.0 / self.cfg.n0 as f64, v, &mut g);
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::FnClassifier;
    use crate::numerics::norm_cdf;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_base_certifies_all_agree_radius() {
        let base = FnClassifier::new(2, |_: &[f64]| Some(1));
        let cfg = SmoothingConfig::default();
        let c = smooth_certify(&base, &[0.1, 0.2], &cfg).unwrap();
        assert_eq!(c.predicted, Some(1));
        assert_abs_diff_eq!(c.p_lower, 0.001f64.powf(0.01), epsilon = 1e-10);
        assert_abs_diff_eq!(c.radius, 0.0300, epsilon = 1e-4);
        assert_abs_diff_eq!(norm_cdf(c.radius / 0.02), c.p_lower, epsilon = 1e-9);
    }

    #[test]
    fn minority_confidence_abstains() {
        let c = radius_from_bound(Some(0), 0.5, 0.02).unwrap();
        assert_eq!(c.predicted, None);
        assert_eq!(c.radius, 0.0);
        let c = radius_from_bound(Some(0), 0.4, 0.02).unwrap();
        assert_eq!(c.radius, 0.0);
    }

    #[test]
    fn abstaining_base_abstains() {
        let base = FnClassifier::new(2, |_: &[f64]| None);
        let c = smooth_certify(&base, &[0.0], &SmoothingConfig::default()).unwrap();
        assert_eq!(c.predicted, None);
    }

    #[test]
    fn deterministic_and_schedule_independent() {
        let base = FnClassifier::new(2, |x: &[f64]| Some(usize::from(x[0] > 0.0)));
        let mut cfg = SmoothingConfig {
            sigma: 0.5,
            seed: RngSeed(9),
            ..SmoothingConfig::default()
        };
        let a = smooth_certify(&base, &[0.1], &cfg).unwrap();
        cfg.execution = Execution::Sequential;
        let b = smooth_certify(&base, &[0.1], &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn halfspace_at_two_sigma_is_mostly_correct() {
        let base = FnClassifier::new(2, |x: &[f64]| Some(usize::from(x[0] > 0.0)));
        let sigma = 0.1;
        let correct = (0..100)
            .filter(|&t| {
                let cfg = SmoothingConfig {
                    sigma,
                    seed: RngSeed(1000 + t),
                    ..SmoothingConfig::default()
                };
                smooth_predict(&base, &[2.0 * sigma, 0.3], &cfg).unwrap() == Some(1)
            })
            .count();
        assert!(correct >= 95, "{correct}");
    }

    #[test]
    fn curve_is_monotone_and_starts_at_smoothed_accuracy() {
        let base = FnClassifier::new(2, |_: &[f64]| Some(0));
        let data = LabeledDataset::new(vec![vec![0.0]; 4], vec![0, 1, 0, 1], 2).unwrap();
        let radii = [0.0, 0.01, 0.02, 0.029, 0.031, 0.1];
        let curve = certified_accuracy_curve(&base, &data, &SmoothingConfig::default(), &radii).unwrap();
        let acc: Vec<f64> = curve.iter().map(|c| c.certified_accuracy).collect();
        assert_eq!(acc, vec![0.5, 0.5, 0.5, 0.5, 0.0, 0.0]);
    }
}
