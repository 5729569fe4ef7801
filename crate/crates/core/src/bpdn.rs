//! l1-regularized reconstruction against a dictionary and its dual.
//!
//! Primal: `min_c ||c||_1 + (lambda/2) ||x - S c||^2`.
//! Dual:   `max_d <x, d> - ||d||^2 / (2 lambda)  s.t. ||S^T d||_inf <= 1`.
//!
//! The dual optimum is unique (strong concavity) and equals the projection of
//! `lambda x` onto the polytope `{d : |<s_i, d>| <= 1}`; it is recovered from
//! the primal residual as `d* = lambda e*`. Primal coefficients need not be
//! unique for overcomplete dictionaries: nothing downstream depends on `c*`
//! beyond its residual, only on `d*` and the active set.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dictionary;
use crate::error::{arg, Error, Result};
use crate::linalg::{dot, norm};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_SWEEPS: usize = 100_000;
/// Active-set tolerance on unit-norm columns.
pub const DEFAULT_TAU: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative duality-gap target: `gap <= tol * max(1, |primal|)`.
    pub tol: f64,
    /// Cap on full coordinate sweeps (working-set sweeps over the current
    /// support are bounded separately).
    pub max_sweeps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: DEFAULT_TOL,
            max_sweeps: DEFAULT_MAX_SWEEPS,
        }
    }
}

/// A query `x` against a dictionary at regularization `lambda`.
#[derive(Debug, Clone, Copy)]
pub struct DualProblemInstance<'a> {
    pub dict: &'a Dictionary,
    pub x: &'a [f64],
    pub lambda: f64,
}

impl<'a> DualProblemInstance<'a> {
    pub fn new(dict: &'a Dictionary, x: &'a [f64], lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return arg(format!("lambda must be positive and finite, got {lambda}"));
        }
        if x.len() != dict.dim() {
            return arg(format!("query has dimension {}, dictionary has {}", x.len(), dict.dim()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return arg("query contains non-finite values");
        }
        Ok(DualProblemInstance { dict, x, lambda })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    pub x: Vec<f64>,
    pub lambda: f64,
    /// Primal coefficients `c*` (dense, length M, mostly zero).
    pub coef: Vec<f64>,
    /// Residual `e* = x - S c*`.
    pub residual: Vec<f64>,
    /// Dual point `d* = lambda e*` (rescaled onto the feasible set if a
    /// rounding-level violation remains).
    pub dual_point: Vec<f64>,
    /// `S^T d*`.
    pub correlations: Vec<f64>,
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub iterations: usize,
}

impl DualSolution {
    /// `(primal, dual, gap)` recomputed from the stored iterate.
    pub fn duality_gap_report(&self) -> (f64, f64, f64) {
        let p = primal_objective(&self.coef, &self.residual, self.lambda);
        let d = dual_objective(self.x.as_slice(), &self.dual_point, self.lambda);
        (p, d, p - d)
    }

    /// Number of nonzero coefficients.
    pub fn support_size(&self) -> usize {
        self.coef.iter().filter(|c| **c != 0.0).count()
    }
}

pub fn primal_objective(coef: &[f64], residual: &[f64], lambda: f64) -> f64 {
    coef.iter().map(|c| c.abs()).sum::<f64>() + 0.5 * lambda * dot(residual, residual)
}

pub fn dual_objective(x: &[f64], d: &[f64], lambda: f64) -> f64 {
    dot(x, d) - dot(d, d) / (2.0 * lambda)
}

#[inline]
fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

struct Iterate {
    coef: Vec<f64>,
    residual: Vec<f64>,
}

struct GapEval {
    primal: f64,
    dual: f64,
    gap: f64,
    dual_point: Vec<f64>,
    correlations: Vec<f64>,
}

fn evaluate(dict: &Dictionary, x: &[f64], lambda: f64, it: &Iterate) -> GapEval {
    let primal = primal_objective(&it.coef, &it.residual, lambda);
    let mut d: Vec<f64> = it.residual.iter().map(|e| lambda * e).collect();
    let mut corr = dict.correlations(&d);
    let worst = corr.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if worst > 1.0 {
        d.iter_mut().for_each(|v| *v /= worst);
        corr.iter_mut().for_each(|v| *v /= worst);
    }
    let dual = dual_objective(x, &d, lambda);
    GapEval {
        primal,
        dual,
        gap: primal - dual,
        dual_point: d,
        correlations: corr,
    }
}

/// One coordinate update; returns |change|.
#[inline]
fn update(dict: &Dictionary, lambda: f64, it: &mut Iterate, i: usize) -> f64 {
    let col = dict.column(i);
    let old = it.coef[i];
    let rho = dot(col, &it.residual) + old;
    let new = soft_threshold(rho, 1.0 / lambda);
    let delta = new - old;
    if delta != 0.0 {
        it.coef[i] = new;
        crate::linalg::axpy(-delta, col, &mut it.residual);
    }
    delta.abs()
}

/// Re-solves the stationarity equations on the current support,
/// `S_A^T S_A c_A = S_A^T x - sign(c_A) / lambda`, keeping the result only if
/// the signs survive. Brings a correctly identified support to machine
/// precision.
fn polish(dict: &Dictionary, x: &[f64], lambda: f64, it: &Iterate) -> Option<Iterate> {
    let support: Vec<usize> = (0..it.coef.len()).filter(|&i| it.coef[i] != 0.0).collect();
    if support.is_empty() || support.len() > dict.dim() {
        return None;
    }
    let k = support.len();
    let n = dict.dim();
    let sa = DMatrix::from_fn(n, k, |r, c| dict.column(support[c])[r]);
    let gram = sa.tr_mul(&sa);
    let xv = DVector::from_column_slice(x);
    let rhs = sa.tr_mul(&xv)
        - DVector::from_iterator(k, support.iter().map(|&i| it.coef[i].signum() / lambda));
    let chol = gram.cholesky()?;
    let ca = chol.solve(&rhs);
    if support
        .iter()
        .zip(ca.iter())
        .any(|(&i, &v)| v == 0.0 || v.signum() != it.coef[i].signum())
    {
        return None;
    }
    let mut coef = vec![0.0; it.coef.len()];
    for (&i, &v) in support.iter().zip(ca.iter()) {
        coef[i] = v;
    }
    let fitted = dict.combine(&coef);
    let residual = x.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    Some(Iterate { coef, residual })
}

/// Solves the regularized primal by cyclic coordinate descent with a
/// working-set inner loop, stopping on the relative duality gap.
pub fn solve(inst: &DualProblemInstance<'_>, opts: &SolverOptions) -> Result<DualSolution> {
    let DualProblemInstance { dict, x, lambda } = *inst;
    if !(opts.tol > 0.0) {
        return arg(format!("solver tolerance must be positive, got {}", opts.tol));
    }
    let m = dict.len();
    let mut it = Iterate {
        coef: vec![0.0; m],
        residual: x.to_vec(),
    };
    // `full` counts full sweeps against the cap; `sweeps` also counts the
    // cheap working-set sweeps and is what gets reported.
    let (mut full, mut sweeps) = (0usize, 0usize);
    let target = |p: f64| opts.tol * p.abs().max(1.0);

    let mut eval = evaluate(dict, x, lambda, &it);
    while eval.gap > target(eval.primal) {
        if full >= opts.max_sweeps {
            let sol = finish(x, lambda, it, eval, sweeps);
            return Err(Error::Convergence {
                iterations: sweeps,
                gap: sol.gap,
                best: Some(Box::new(sol)),
            });
        }
        for i in 0..m {
            update(dict, lambda, &mut it, i);
        }
        full += 1;
        sweeps += 1;

        // Working set: iterate on the current support until it settles.
        let support: Vec<usize> = (0..m).filter(|&i| it.coef[i] != 0.0).collect();
        let scale = norm(x).max(1e-300);
        for _ in 0..1000 {
            let mut biggest = 0.0f64;
            for &i in &support {
                biggest = biggest.max(update(dict, lambda, &mut it, i));
            }
            sweeps += 1;
            if biggest <= 1e-13 * scale {
                break;
            }
        }
        eval = evaluate(dict, x, lambda, &it);
        // Correlated supports converge slowly; an exact solve on the
        // support usually finishes the job.
        if eval.gap > target(eval.primal) {
            if let Some(p) = polish(dict, x, lambda, &it) {
                let pe = evaluate(dict, x, lambda, &p);
                if pe.gap < eval.gap {
                    it = p;
                    eval = pe;
                }
            }
        }
    }

    if let Some(p) = polish(dict, x, lambda, &it) {
        let pe = evaluate(dict, x, lambda, &p);
        if pe.gap <= eval.gap.max(1e-14 * pe.primal.abs().max(1.0)) {
            it = p;
            eval = pe;
        }
    }
    Ok(finish(x, lambda, it, eval, sweeps))
}

fn finish(x: &[f64], lambda: f64, it: Iterate, eval: GapEval, sweeps: usize) -> DualSolution {
    DualSolution {
        x: x.to_vec(),
        lambda,
        coef: it.coef,
        residual: it.residual,
        dual_point: eval.dual_point,
        correlations: eval.correlations,
        primal_value: eval.primal,
        dual_value: eval.dual,
        gap: eval.gap.max(0.0),
        iterations: sweeps,
    }
}

/// Sign of a signed dictionary column `±s_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn of(v: f64) -> Sign {
        if v < 0.0 {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActiveEntry {
    /// Dictionary column (0-based).
    pub index: usize,
    pub sign: Sign,
}

impl ActiveEntry {
    /// Index into the signed view `T = [S, -S]`.
    pub fn signed_index(&self, m: usize) -> usize {
        match self.sign {
            Sign::Plus => self.index,
            Sign::Minus => self.index + m,
        }
    }
}

/// Signed columns whose dual constraint is tight at `d*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveSet {
    /// Sorted by column index.
    pub entries: Vec<ActiveEntry>,
    pub tau: f64,
    /// Some activity `|<s_i, d*>|` sits in the ambiguous band
    /// `[1 - 10 tau, 1 - tau/10]`, so a perturbation of order tau could
    /// change membership.
    pub near_degenerate: bool,
}

impl ActiveSet {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn contains(&self, e: &ActiveEntry) -> bool {
        self.entries.binary_search(e).is_ok()
    }
}

/// `true` when activity `a` is too close to the threshold to call.
pub fn activity_is_ambiguous(a: f64, tau: f64) -> bool {
    a >= 1.0 - 10.0 * tau && a <= 1.0 - 0.1 * tau
}

/// Entries `(i, sigma)` with `sigma <s_i, d*> >= 1 - tau`.
pub fn active_set(sol: &DualSolution, tau: f64) -> Result<ActiveSet> {
    if !(tau > 0.0 && tau < 1.0) {
        return arg(format!("active-set tolerance must lie in (0,1), got {tau}"));
    }
    let mut entries = Vec::new();
    let mut near_degenerate = false;
    for (i, &a) in sol.correlations.iter().enumerate() {
        // the two signs cannot both be tight unless d* = 0, where neither is
        if a >= 1.0 - tau {
            entries.push(ActiveEntry { index: i, sign: Sign::Plus });
        } else if -a >= 1.0 - tau {
            entries.push(ActiveEntry { index: i, sign: Sign::Minus });
        }
        if activity_is_ambiguous(a.abs(), tau) {
            near_degenerate = true;
        }
    }
    Ok(ActiveSet {
        entries,
        tau,
        near_degenerate,
    })
}

/// Largest KKT violation of a solution: off-support dual infeasibility and
/// on-support departure from `sign(c_i) <s_i, d*> = 1`.
pub fn kkt_violation(sol: &DualSolution) -> f64 {
    let mut worst = 0.0f64;
    for (c, a) in sol.coef.iter().zip(&sol.correlations) {
        worst = worst.max(a.abs() - 1.0);
        if *c != 0.0 {
            worst = worst.max((c.signum() * a - 1.0).abs());
        }
    }
    worst
}
