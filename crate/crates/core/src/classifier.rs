//! The dual classifier `g_lambda` and a nearest-subspace baseline.
//!
//! `g_lambda` votes with the labels of the active set. A column counts for
//! its label whichever sign is active, since labels belong to data points.
//! An empty active set abstains.

use serde::{Deserialize, Serialize};

use crate::bpdn::{active_set, solve, ActiveSet, DualProblemInstance, DualSolution, SolverOptions, DEFAULT_TAU};
use crate::certificate::{build_certificate, CertificatePolyhedron};
use crate::data::{Dictionary, SubspaceModel};
use crate::error::{arg, Result};
use crate::linalg::{norm, scale, sub};

/// Label-only classifier; `None` means abstain.
pub trait Classifier: Sync {
    fn num_classes(&self) -> usize;
    fn classify(&self, x: &[f64]) -> Option<usize>;
}

/// Classifier with per-class scores, used as a differentiable surrogate.
pub trait ScoredClassifier: Classifier {
    fn scores(&self, x: &[f64]) -> Vec<f64>;

    /// Gradient of `scores(x)[class]` with respect to `x`.
    fn score_gradient(&self, x: &[f64], class: usize) -> Vec<f64>;

    /// Gradient of the margin loss `max_{j != y} s_j - s_y`.
    fn margin_gradient(&self, x: &[f64], y: usize) -> Vec<f64> {
        let s = self.scores(x);
        let Some(rival) = best_other(&s, y) else {
            return vec![0.0; x.len()];
        };
        sub(&self.score_gradient(x, rival), &self.score_gradient(x, y))
    }
}

/// Highest-scoring class other than `y` (lowest id on ties).
pub(crate) fn best_other(scores: &[f64], y: usize) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, &v) in scores.iter().enumerate() {
        if k != y && best.is_none_or(|b| v > scores[b]) {
            best = Some(k);
        }
    }
    best
}

/// Wraps a closure as a [`Classifier`].
pub struct FnClassifier<F> {
    num_classes: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> Option<usize> + Sync> FnClassifier<F> {
    pub fn new(num_classes: usize, f: F) -> Self {
        FnClassifier { num_classes, f }
    }
}

impl<F: Fn(&[f64]) -> Option<usize> + Sync> Classifier for FnClassifier<F> {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn classify(&self, x: &[f64]) -> Option<usize> {
        (self.f)(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationRule {
    /// Most votes wins; ties go to the lowest class id.
    #[default]
    Majority,
    /// The single voted class if there is exactly one, else abstain.
    UnanimousOrAbstain,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Option<usize>,
    /// Per-class vote counts.
    pub votes: Vec<usize>,
    pub active_size: usize,
}

/// Aggregates active-set labels. Order of `labels` does not matter.
pub fn aggregate(labels: &[usize], num_classes: usize, rule: AggregationRule) -> Prediction {
    let mut votes = vec![0usize; num_classes];
    for &l in labels {
        votes[l] += 1;
    }
    let label = if labels.is_empty() {
        None
    } else {
        match rule {
            AggregationRule::Majority => {
                let mut best = 0;
                for k in 1..num_classes {
                    if votes[k] > votes[best] {
                        best = k;
                    }
                }
                Some(best)
            }
            AggregationRule::UnanimousOrAbstain => {
                let mut voted = votes.iter().enumerate().filter(|(_, v)| **v > 0);
                match (voted.next(), voted.next()) {
                    (Some((k, _)), None) => Some(k),
                    _ => None,
                }
            }
        }
    };
    Prediction {
        label,
        votes,
        active_size: labels.len(),
    }
}

/// Everything computed for one query of the dual classifier.
#[derive(Debug, Clone)]
pub struct DualPrediction<'d> {
    pub prediction: Prediction,
    pub solution: DualSolution,
    pub active: ActiveSet,
    pub certificate: Option<CertificatePolyhedron<'d>>,
}

#[derive(Debug, Clone)]
pub struct DualClassifier<'d> {
    dict: &'d Dictionary,
    lambda: f64,
    rule: AggregationRule,
    tau: f64,
    options: SolverOptions,
}

impl<'d> DualClassifier<'d> {
    pub fn new(dict: &'d Dictionary, lambda: f64, rule: AggregationRule) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return arg(format!("lambda must be positive and finite, got {lambda}"));
        }
        Ok(DualClassifier {
            dict,
            lambda,
            rule,
            tau: DEFAULT_TAU,
            options: SolverOptions::default(),
        })
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_solver_options(mut self, options: SolverOptions) -> Self {
        self.options = options;
        self
    }

    pub fn dictionary(&self) -> &'d Dictionary {
        self.dict
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn rule(&self) -> AggregationRule {
        self.rule
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn solve(&self, x: &[f64]) -> Result<DualSolution> {
        solve(&DualProblemInstance::new(self.dict, x, self.lambda)?, &self.options)
    }

    fn vote(&self, active: &ActiveSet) -> Prediction {
        let labels: Vec<usize> = active.entries.iter().map(|e| self.dict.label(e.index)).collect();
        aggregate(&labels, self.dict.num_classes(), self.rule)
    }

    /// Prediction without building the certificate.
    pub fn predict_label(&self, x: &[f64]) -> Result<(Prediction, ActiveSet)> {
        let sol = self.solve(x)?;
        let active = active_set(&sol, self.tau)?;
        Ok((self.vote(&active), active))
    }

    pub fn predict(&self, x: &[f64]) -> Result<DualPrediction<'d>> {
        let solution = self.solve(x)?;
        let active = active_set(&solution, self.tau)?;
        let prediction = self.vote(&active);
        let certificate = if active.is_empty() {
            None
        } else {
            Some(build_certificate(self.dict, &solution, &active)?)
        };
        Ok(DualPrediction {
            prediction,
            solution,
            active,
            certificate,
        })
    }
}

impl Classifier for DualClassifier<'_> {
    fn num_classes(&self) -> usize {
        self.dict.num_classes()
    }

    fn classify(&self, x: &[f64]) -> Option<usize> {
        match self.predict_label(x) {
            Ok((p, _)) => p.label,
            Err(e) => {
                log::warn!("dual classifier abstains: {e}");
                None
            }
        }
    }
}

/// Scores are the largest `|<s_i, x>|` per class, a smooth-almost-everywhere
/// stand-in for the vote that points the same way.
impl ScoredClassifier for DualClassifier<'_> {
    fn scores(&self, x: &[f64]) -> Vec<f64> {
        let corr = self.dict.correlations(x);
        let mut s = vec![0.0f64; self.dict.num_classes()];
        for (i, c) in corr.iter().enumerate() {
            let k = self.dict.label(i);
            s[k] = s[k].max(c.abs());
        }
        s
    }

    fn score_gradient(&self, x: &[f64], class: usize) -> Vec<f64> {
        let corr = self.dict.correlations(x);
        let best = (0..self.dict.len())
            .filter(|&i| self.dict.label(i) == class)
            .max_by(|&a, &b| corr[a].abs().total_cmp(&corr[b].abs()).then(b.cmp(&a)));
        match best {
            Some(i) => scale(corr[i].signum(), self.dict.column(i)),
            None => vec![0.0; x.len()],
        }
    }
}

/// One-shot form: prediction plus certificate when the active set is nonempty.
pub fn predict_dual<'d>(
    dict: &'d Dictionary,
    x: &[f64],
    lambda: f64,
    rule: AggregationRule,
) -> Result<(Prediction, Option<CertificatePolyhedron<'d>>)> {
    let p = DualClassifier::new(dict, lambda, rule)?.predict(x)?;
    Ok((p.prediction, p.certificate))
}

/// Negated distances to each class subspace.
pub fn score_nearest_subspace(model: &SubspaceModel, x: &[f64]) -> Vec<f64> {
    (0..model.num_classes()).map(|k| -model.distance(k, x)).collect()
}

/// Class whose subspace is closest to `x`; ties go to the lowest id.
pub fn predict_nearest_subspace(model: &SubspaceModel, x: &[f64]) -> usize {
    let s = score_nearest_subspace(model, x);
    let mut best = 0;
    for k in 1..s.len() {
        if s[k] > s[best] {
            best = k;
        }
    }
    best
}

#[derive(Debug, Clone, Copy)]
pub struct NearestSubspace<'m> {
    model: &'m SubspaceModel,
}

impl<'m> NearestSubspace<'m> {
    pub fn new(model: &'m SubspaceModel) -> Self {
        NearestSubspace { model }
    }
}

impl Classifier for NearestSubspace<'_> {
    fn num_classes(&self) -> usize {
        self.model.num_classes()
    }

    fn classify(&self, x: &[f64]) -> Option<usize> {
        Some(predict_nearest_subspace(self.model, x))
    }
}

impl ScoredClassifier for NearestSubspace<'_> {
    fn scores(&self, x: &[f64]) -> Vec<f64> {
        score_nearest_subspace(self.model, x)
    }

    fn score_gradient(&self, x: &[f64], class: usize) -> Vec<f64> {
        let r = self.model.residual(class, x);
        let nr = norm(&r);
        if nr == 0.0 {
            return vec![0.0; x.len()];
        }
        scale(-1.0 / nr, &r)
    }
}

/// Fraction of points whose prediction equals the label; abstentions count
/// as errors.
pub fn accuracy(predictions: &[Option<usize>], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let correct = predictions
        .iter()
        .zip(labels)
        .filter(|(p, y)| **p == Some(**y))
        .count();
    correct as f64 / labels.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use crate::numerics::RngSeed;
    use nalgebra::DMatrix;

    fn eye2() -> Dictionary {
        Dictionary::from_columns(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![0, 1], 2).unwrap()
    }

    #[test]
    fn aggregation_rules() {
        let p = aggregate(&[2, 1, 2, 1], 3, AggregationRule::Majority);
        assert_eq!(p.label, Some(1));
        assert_eq!(p.votes, vec![0, 2, 2]);
        assert_eq!(p.active_size, 4);
        assert_eq!(aggregate(&[], 3, AggregationRule::Majority).label, None);
        assert_eq!(aggregate(&[1, 1], 3, AggregationRule::UnanimousOrAbstain).label, Some(1));
        assert_eq!(aggregate(&[1, 0], 3, AggregationRule::UnanimousOrAbstain).label, None);
        let a = aggregate(&[0, 2, 2, 1], 3, AggregationRule::Majority);
        let b = aggregate(&[2, 1, 0, 2], 3, AggregationRule::Majority);
        assert_eq!(a, b);
    }

    #[test]
    fn dual_prediction_examples() {
        let dict = eye2();
        let (p, cert) = predict_dual(&dict, &[0.5, 0.0], 4.0, AggregationRule::Majority).unwrap();
        assert_eq!(p.label, Some(0));
        assert_eq!(p.votes, vec![1, 0]);
        assert!(cert.is_some());

        let (p, cert) = predict_dual(&dict, &[0.5, 0.0], 1.0, AggregationRule::Majority).unwrap();
        assert_eq!(p.label, None);
        assert!(cert.is_none());

        // sign is ignored for the vote
        let (p, _) = predict_dual(&dict, &[0.0, -0.5], 4.0, AggregationRule::Majority).unwrap();
        assert_eq!(p.label, Some(1));
    }

    #[test]
    fn nearest_subspace_basics() {
        let e = |i: usize| DMatrix::from_fn(3, 1, |r, _| if r == i { 1.0 } else { 0.0 });
        let model = SubspaceModel::new(vec![e(0), e(1)], 0.0).unwrap();
        assert_eq!(predict_nearest_subspace(&model, &[0.0, 2.0, 0.0]), 1);
        assert_eq!(predict_nearest_subspace(&model, &[1.0, 1.0, 0.0]), 0);
        assert_eq!(score_nearest_subspace(&model, &[0.0, 2.0, 0.0])[1], 0.0);

        let model = SubspaceModel::random(6, 2, 3, 0.0, RngSeed(4)).unwrap();
        let ns = NearestSubspace::new(&model);
        let x = [0.3, -0.1, 0.2, 0.5, -0.4, 0.1];
        let s = ns.scores(&x);
        for k in 0..3 {
            // finite-difference check of the analytic gradient
            let g = ns.score_gradient(&x, k);
            for j in 0..6 {
                let mut xp = x;
                xp[j] += 1e-6;
                let fd = (ns.scores(&xp)[k] - s[k]) / 1e-6;
                assert!((fd - g[j]).abs() < 1e-4, "class {k} coord {j}: {fd} vs {}", g[j]);
            }
        }
    }

    #[test]
    fn dual_scores_gradient_is_a_signed_column() {
        let dict = eye2();
        let c = DualClassifier::new(&dict, 4.0, AggregationRule::Majority).unwrap();
        assert_eq!(c.scores(&[0.5, -0.2]), vec![0.5, 0.2]);
        assert_eq!(c.score_gradient(&[0.5, -0.2], 1), vec![-0.0, -1.0]);
        let g = c.margin_gradient(&[0.5, -0.2], 0);
        assert_eq!(g, vec![-1.0, -1.0]);
        assert!(dot(&g, &g) > 0.0);
    }

    #[test]
    fn accuracy_counts_abstain_as_wrong() {
        assert_eq!(accuracy(&[Some(0), None, Some(1), Some(0)], &[0, 0, 1, 1]), 0.5);
    }
}
