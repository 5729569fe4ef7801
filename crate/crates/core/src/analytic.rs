//! Closed-form robustness examples and concentration parameters.
//!
//! Sphere example: class 1 sits within angle `theta0` of a pole with density
//! `psi(theta) / (c_psi sin^{n-2} theta)`, class 2 is uniform on the rest,
//! and the classifier is the cap boundary. Cube example: two slabs of width
//! `gamma = e^{-alpha}` in `[-1,1]^n`. Class ids are 0 and 1; the docs below
//! call them classes 1 and 2.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attacks::AttackResult;
use crate::classifier::Classifier;
use crate::data::LabeledDataset;
use crate::error::{arg, Result};
use crate::linalg::dist;
use crate::numerics::{reg_inc_beta, RngSeed};

/// Mass fraction `1 - delta` on a set of volume at most `C exp(-n eps)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationParams {
    pub c: f64,
    /// May be negative: the cube example yields `alpha/n - 1`.
    pub epsilon: f64,
    pub delta: f64,
}

/// Concentration with `2 eps`-expansions of the class supports overlapping
/// in mass at most `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrongConcentrationParams {
    pub epsilon: f64,
    pub delta: f64,
    pub gamma: f64,
}

/// Normalized area of the spherical cap of angle `alpha` on `S^{n-1}`.
pub fn cap_measure(n: usize, alpha: f64) -> Result<f64> {
    if n < 2 {
        return arg(format!("sphere dimension n must be at least 2, got {n}"));
    }
    if !(alpha > 0.0 && alpha <= FRAC_PI_2) {
        return arg(format!("cap angle must lie in (0, pi/2], got {alpha}"));
    }
    let s = alpha.sin();
    Ok(0.5 * reg_inc_beta((s * s).min(1.0), (n as f64 - 1.0) / 2.0, 0.5)?)
}

/// Cap measure extended to `[0, pi]` by reflection.
fn cap_any(n: usize, alpha: f64) -> Result<f64> {
    if alpha <= 0.0 {
        Ok(0.0)
    } else if alpha <= FRAC_PI_2 {
        cap_measure(n, alpha)
    } else if alpha < std::f64::consts::PI {
        Ok(1.0 - cap_measure(n, std::f64::consts::PI - alpha)?)
    } else {
        Ok(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Psi {
    Constant,
    ExpDecay,
}

impl Psi {
    /// `int_a^b psi`.
    fn integral(self, a: f64, b: f64) -> f64 {
        match self {
            Psi::Constant => b - a,
            Psi::ExpDecay => (-a).exp() - (-b).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereExampleParams {
    pub n: usize,
    pub theta0: f64,
    pub psi: Psi,
}

impl SphereExampleParams {
    pub fn new(n: usize, theta0: f64, psi: Psi) -> Result<Self> {
        if n < 2 {
            return arg(format!("sphere dimension n must be at least 2, got {n}"));
        }
        if !(theta0 > 0.0 && theta0 <= FRAC_PI_2) {
            return arg(format!("theta0 must lie in (0, pi/2], got {theta0}"));
        }
        Ok(SphereExampleParams { n, theta0, psi })
    }

    /// `c_psi = int_0^theta0 psi`.
    pub fn c_psi(&self) -> f64 {
        self.psi.integral(0.0, self.theta0)
    }

    /// Class-1 mass that can be pushed out of the cap: `q1(d^{+eps}(C2))`.
    pub fn class1_term(&self, eps: f64) -> f64 {
        if eps >= self.theta0 {
            1.0
        } else if eps <= 0.0 {
            0.0
        } else {
            self.psi.integral(self.theta0 - eps, self.theta0) / self.c_psi()
        }
    }

    /// Class-2 mass that can be pushed into the cap: `q2(d^{+eps}(C1))`.
    pub fn class2_term(&self, eps: f64) -> Result<f64> {
        if eps <= 0.0 {
            return Ok(0.0);
        }
        let m0 = cap_measure(self.n, self.theta0)?;
        let d = 2.0 * cap_measure(self.n, FRAC_PI_2)? - m0;
        let reach = self.theta0 + eps;
        if reach >= std::f64::consts::PI {
            return Ok(1.0);
        }
        Ok(((cap_any(self.n, reach)? - m0) / d).clamp(0.0, 1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereRiskRow {
    pub epsilon: f64,
    pub class1_term: f64,
    pub class2_term: f64,
    pub risk: f64,
}

/// `R(eps) = 0.5 q1(d^{+eps}(C2)) + 0.5 q2(d^{+eps}(C1))` for geodesic `eps`.
pub fn sphere_risk_curve(params: &SphereExampleParams, eps_grid: &[f64]) -> Result<Vec<SphereRiskRow>> {
    eps_grid
        .iter()
        .map(|&epsilon| {
            if !(0.0..=std::f64::consts::PI).contains(&epsilon) {
                return arg(format!("geodesic epsilon must lie in [0, pi], got {epsilon}"));
            }
            let class1_term = params.class1_term(epsilon);
            let class2_term = params.class2_term(epsilon)?;
            Ok(SphereRiskRow {
                epsilon,
                class1_term,
                class2_term,
                risk: 0.5 * class1_term + 0.5 * class2_term,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubeExampleParams {
    pub n: usize,
    pub alpha: f64,
    pub epsilon: f64,
}

impl CubeExampleParams {
    pub fn new(n: usize, alpha: f64, epsilon: f64) -> Result<Self> {
        if n < 2 {
            return arg(format!("cube dimension n must be at least 2, got {n}"));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return arg(format!("alpha must be positive, got {alpha}"));
        }
        if !(epsilon >= 0.0) {
            return arg(format!("epsilon must be nonnegative, got {epsilon}"));
        }
        let p = CubeExampleParams { n, alpha, epsilon };
        if p.threshold() > 1.0 {
            return arg("gamma/2 + epsilon exceeds the cube half-width 1");
        }
        Ok(p)
    }

    pub fn gamma(&self) -> f64 {
        (-self.alpha).exp()
    }

    /// `gamma/2 + eps`, the half-width of the slabs the classifier uses.
    pub fn threshold(&self) -> f64 {
        self.gamma() / 2.0 + self.epsilon
    }
}

/// `0.5 (e^{-alpha} + 4 eps)`.
pub fn cube_risk_bound(params: &CubeExampleParams) -> f64 {
    0.5 * (params.gamma() + 4.0 * params.epsilon)
}

/// Concentration `(0.5, alpha/n - 1, 0)` of each class on its slab, and
/// strong concentration `(eps, 0, e^{-alpha}/2 + 2 eps)`.
pub fn cube_concentration(params: &CubeExampleParams) -> (ConcentrationParams, StrongConcentrationParams) {
    (
        ConcentrationParams {
            c: 0.5,
            epsilon: params.alpha / params.n as f64 - 1.0,
            delta: 0.0,
        },
        StrongConcentrationParams {
            epsilon: params.epsilon,
            delta: 0.0,
            gamma: 0.5 * params.gamma() + 2.0 * params.epsilon,
        },
    )
}

/// The example's classifier: class 1 on `{|x2| <= c, |x1| >= c}`, class 0
/// elsewhere, with `c = gamma/2 + eps`.
#[derive(Debug, Clone, Copy)]
pub struct CubeClassifier {
    params: CubeExampleParams,
}

impl CubeClassifier {
    pub fn new(params: CubeExampleParams) -> Self {
        CubeClassifier { params }
    }
}

impl Classifier for CubeClassifier {
    fn num_classes(&self) -> usize {
        2
    }

    fn classify(&self, x: &[f64]) -> Option<usize> {
        let c = self.params.threshold();
        Some(usize::from(x[1].abs() <= c && x[0].abs() >= c))
    }
}

/// `per_class` points of each class: class `k` is uniform on the slab
/// `|x_{k+1}| <= gamma/2` of `[-1,1]^n`.
pub fn sample_cube(params: &CubeExampleParams, per_class: usize, seed: RngSeed) -> Result<LabeledDataset> {
    let mut rng = seed.rng();
    let half = params.gamma() / 2.0;
    let mut points = Vec::with_capacity(2 * per_class);
    let mut labels = Vec::with_capacity(2 * per_class);
    for k in 0..2 {
        for _ in 0..per_class {
            let mut x: Vec<f64> = (0..params.n).map(|_| rng.random_range(-1.0..=1.0)).collect();
            x[k] = rng.random_range(-half..=half);
            points.push(x);
            labels.push(k);
        }
    }
    LabeledDataset::new(points, labels, 2)
}

/// Exact worst-case perturbation against [`CubeClassifier`].
///
/// Only the first two coordinates matter, so the nearest point of the other
/// decision region is found coordinate-wise; the attack succeeds when it is
/// within `eps`. Class-1 points leave their region through its open side, so
/// the reported point sits `1e-12` past the boundary.
pub fn cube_worst_case_attack(params: &CubeExampleParams, x: &[f64], y: usize) -> AttackResult {
    let c = params.threshold();
    let clf = CubeClassifier::new(*params);
    let sgn = |v: f64| if v < 0.0 { -1.0 } else { 1.0 };
    let mut adv = x.to_vec();
    if y == 0 {
        adv[0] = sgn(x[0]) * x[0].abs().max(c);
        adv[1] = sgn(x[1]) * x[1].abs().min(c);
    } else {
        let via_x1 = x[0].abs() - c;
        let via_x2 = c - x[1].abs();
        if via_x1 <= via_x2 || c >= 1.0 {
            adv[0] = sgn(x[0]) * (c - 1e-12).max(0.0).min(x[0].abs());
        } else {
            adv[1] = sgn(x[1]) * (c + 1e-12).max(x[1].abs());
        }
    }
    let final_l2 = dist(&adv, x);
    let success = clf.classify(&adv) != Some(y) && final_l2 <= params.epsilon + 1e-9;
    AttackResult {
        adversarial_x: adv,
        success,
        final_l2,
        in_certificate: false,
        transcript: Vec::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationRow {
    /// Points selected per class.
    pub m: usize,
    /// Smallest l2 distance between selected points of different classes.
    pub epsilon: f64,
    /// `1 - delta_m = min_k q_k(S_k)`.
    pub mass: f64,
}

/// Greedy empirical concentration.
///
/// Points are ranked by decreasing distance to their nearest neighbour
/// (globally, or within their class when `within_class`), ties by index. For
/// each `m`, the first `m` ranked points of every class form `S_k`.
/// Requests beyond a class size are clamped.
pub fn empirical_concentration_curve(data: &LabeledDataset, m_grid: &[usize], within_class: bool) -> Result<Vec<ConcentrationRow>> {
    if data.is_empty() {
        return arg("concentration curve needs a nonempty dataset");
    }
    let n = data.len();
    let nn: Vec<f64> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && (!within_class || data.label(j) == data.label(i)))
                .map(|j| dist(data.point(i), data.point(j)))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| nn[b].total_cmp(&nn[a]));
    let k = data.num_classes();
    let mut ranked: Vec<Vec<usize>> = vec![Vec::new(); k];
    for &i in &order {
        ranked[data.label(i)].push(i);
    }
    let sizes: Vec<usize> = ranked.iter().map(Vec::len).collect();
    let present: Vec<usize> = (0..k).filter(|&c| sizes[c] > 0).collect();
    m_grid
        .iter()
        .map(|&m| {
            let biggest = present.iter().map(|&c| sizes[c]).max().unwrap_or(0);
            if present.iter().any(|&c| m > sizes[c]) {
                log::warn!("m = {m} exceeds a class size; clamping per class");
            }
            let m = m.min(biggest);
            let sel: Vec<&[usize]> = present.iter().map(|&c| &ranked[c][..m.min(sizes[c])]).collect();
            let mut eps = f64::INFINITY;
            for a in 0..sel.len() {
                for b in a + 1..sel.len() {
                    for &i in sel[a] {
                        for &j in sel[b] {
                            eps = eps.min(dist(data.point(i), data.point(j)));
                        }
                    }
                }
            }
            let mass = present
                .iter()
                .zip(&sel)
                .map(|(&c, s)| s.len() as f64 / sizes[c] as f64)
                .fold(1.0, f64::min);
            Ok(ConcentrationRow { m, epsilon: eps, mass })
        })
        .collect()
}

/// `vol_a (1-eps)^n`, the volume of the `eps`-shrinkage of a unit-ball-like
/// set, and the looser `vol_a exp(-n eps)`.
pub fn shrinkage_volume_bound(n: usize, eps: f64, vol_a: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&eps) {
        return arg(format!("epsilon must lie in [0,1), got {eps}"));
    }
    Ok((vol_a * (1.0 - eps).powi(n as i32), vol_a * (-(n as f64) * eps).exp()))
}
