//! Polyhedral certificates `C(x) = F(x) + V(x)`.
//!
//! `F` is the face of the dual polytope `{d : T^T d <= 1}` cut out by the
//! active constraints (tight on active columns, slack elsewhere), and `V` is
//! the cone generated by the active columns. Every `lambda x'` inside `C`
//! projects onto `F`, so it has the same active set and the same dual
//! prediction as the anchor.
//!
//! All geometry here lives in the lambda-scaled space of the dual; public
//! entry points take and return x-space vectors and convert. Membership and
//! projection use the closure of `C`: strict inequalities are not decidable
//! in floating point.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bpdn::{ActiveEntry, ActiveSet, DualSolution};
use crate::data::Dictionary;
use crate::error::{arg, Error, Result};
use crate::linalg::{dist, dot, norm, null_space};

pub const DEFAULT_MEMBERSHIP_TOL: f64 = 1e-7;
pub const DEFAULT_PROJECTION_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_VERTICES: usize = 10_000;
/// Cap on basis combinations examined during vertex or facet enumeration.
pub const MAX_COMBINATIONS: usize = 50_000_000;

#[derive(Debug, Clone)]
pub struct CertificatePolyhedron<'d> {
    dict: &'d Dictionary,
    anchor: Vec<f64>,
    lambda: f64,
    active: ActiveSet,
    dual_point: Vec<f64>,
    /// Signed-view indices of the distinct active normals.
    eq_idx: Vec<usize>,
    /// Signed-view indices of the distinct remaining normals.
    ineq_idx: Vec<usize>,
}

/// Distinct signed columns, keeping the first index of each duplicate group.
fn dedup_signed(dict: &Dictionary, idx: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut out = Vec::new();
    for j in idx {
        let key: Vec<u64> = dict.signed_column(j).iter().map(|v| (v + 0.0).to_bits()).collect();
        if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(key) {
            e.insert(j);
            out.push(j);
        }
    }
    out
}

/// Builds `C(x)` from a solved instance and its active set.
pub fn build_certificate<'d>(
    dict: &'d Dictionary,
    sol: &DualSolution,
    active: &ActiveSet,
) -> Result<CertificatePolyhedron<'d>> {
    if active.is_empty() {
        return Err(Error::CertificateUndefined(
            "empty active set: lambda x lies inside the dual polytope".into(),
        ));
    }
    if sol.x.len() != dict.dim() {
        return arg("solution and dictionary dimensions differ");
    }
    let m = dict.len();
    let mut used = vec![false; 2 * m];
    for e in &active.entries {
        if e.index >= m {
            return arg(format!("active index {} out of range 0..{m}", e.index));
        }
        used[e.signed_index(m)] = true;
    }
    if let Some(i) = (0..m).find(|&i| used[i] && used[i + m]) {
        return Err(Error::CertificateUndefined(format!(
            "column {i} is active with both signs; <t,d> = 1 and <-t,d> = 1 cannot hold together"
        )));
    }
    let eq_idx = dedup_signed(dict, (0..2 * m).filter(|&j| used[j]));
    let ineq_idx = dedup_signed(dict, (0..2 * m).filter(|&j| !used[j]));
    Ok(CertificatePolyhedron {
        dict,
        anchor: sol.x.clone(),
        lambda: sol.lambda,
        active: active.clone(),
        dual_point: sol.dual_point.clone(),
        eq_idx,
        ineq_idx,
    })
}

/// Result of a membership query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Membership {
    pub inside: bool,
    /// Inside but within `tol` of the boundary of the closure.
    pub on_boundary: bool,
    /// Distance from `lambda x'` to the closure of `C` (lambda space).
    pub distance: f64,
}

impl<'d> CertificatePolyhedron<'d> {
    pub fn dim(&self) -> usize {
        self.anchor.len()
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn active(&self) -> &ActiveSet {
        &self.active
    }

    pub fn dual_point(&self) -> &[f64] {
        &self.dual_point
    }

    pub fn dictionary(&self) -> &'d Dictionary {
        self.dict
    }

    /// Active normals `t_i` (`<t_i, d> = 1` on `F`).
    pub fn equality_normals(&self) -> Vec<Vec<f64>> {
        self.eq_idx.iter().map(|&j| self.dict.signed_column(j)).collect()
    }

    /// Remaining normals (`<t_j, d> <= 1` on the closure of `F`).
    pub fn inequality_normals(&self) -> Vec<Vec<f64>> {
        self.ineq_idx.iter().map(|&j| self.dict.signed_column(j)).collect()
    }

    /// Generators of `V`; the same vectors as the equality normals.
    pub fn cone_generators(&self) -> Vec<Vec<f64>> {
        self.equality_normals()
    }

    fn eq_matrix(&self) -> DMatrix<f64> {
        cols_matrix(self.dict, &self.eq_idx)
    }

    fn ineq_matrix(&self) -> DMatrix<f64> {
        cols_matrix(self.dict, &self.ineq_idx)
    }

    /// Basis of the directions every constraint ignores (`null(S^T)`);
    /// empty whenever the dictionary spans the ambient space.
    fn lineality(&self) -> DMatrix<f64> {
        let n = self.dim();
        let m = self.dict.len();
        let st = DMatrix::from_fn(m, n, |r, c| self.dict.column(r)[c]);
        null_space(&st, 1e-10)
    }

    pub fn projector(&self, tol: f64) -> Result<Projector> {
        Projector::new(self.eq_matrix(), self.ineq_matrix(), tol)
    }

    /// Nearest point of the closure of `C` to `lambda y`, mapped back to x-space.
    pub fn project_onto(&self, y: &[f64], tol: f64) -> Result<Vec<f64>> {
        self.check_dim(y)?;
        let p = self.projector(tol)?;
        Ok(self.project_with(&p, y)?.point)
    }

    pub(crate) fn project_with(&self, proj: &Projector, y: &[f64]) -> Result<Projection> {
        let ly: Vec<f64> = y.iter().map(|v| self.lambda * v).collect();
        let mut out = proj.project(&ly)?;
        out.point.iter_mut().for_each(|v| *v /= self.lambda);
        Ok(out)
    }

    fn check_dim(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.dim() {
            return arg(format!("point has dimension {}, certificate has {}", y.len(), self.dim()));
        }
        Ok(())
    }

    pub fn membership(&self, x_prime: &[f64], tol: f64) -> Result<Membership> {
        self.check_dim(x_prime)?;
        let p = self.projector(DEFAULT_PROJECTION_TOL.min(tol.max(1e-12)))?;
        self.membership_with(&p, x_prime, tol)
    }

    pub(crate) fn membership_with(&self, proj: &Projector, x_prime: &[f64], tol: f64) -> Result<Membership> {
        let pr = self.project_with(proj, x_prime)?;
        let distance = self.lambda * dist(&pr.point, x_prime);
        let inside = distance <= tol;
        Ok(Membership {
            inside,
            on_boundary: inside && pr.boundary_slack <= tol,
            distance,
        })
    }

    /// `true` iff `lambda x'` lies within `tol` of the closure of `C`.
    pub fn contains(&self, x_prime: &[f64], tol: f64) -> Result<bool> {
        Ok(self.membership(x_prime, tol)?.inside)
    }

    /// Extreme points of the closure of `F` (lambda space).
    ///
    /// When the dictionary does not span the space, `F` has a lineality
    /// space; its extreme points are then taken within `range(S)`.
    pub fn enumerate_face_vertices(&self, max_vertices: usize) -> Result<Vec<Vec<f64>>> {
        let n = self.dim();
        let lin = self.lineality();
        // Independent equality rows: active normals, then lineality (rhs 0).
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let eq = self.equality_normals();
        let lin_rows: Vec<Vec<f64>> = (0..lin.ncols()).map(|c| lin.column(c).iter().copied().collect()).collect();
        for (row, rhs) in eq.iter().map(|r| (r, 1.0)).chain(lin_rows.iter().map(|r| (r, 0.0))) {
            if let Some(q) = orthogonal_residual(&basis, row) {
                basis.push(q);
                rows.push((row.clone(), rhs));
            }
        }
        let ineq = self.inequality_normals();
        let need = n.saturating_sub(rows.len());
        let combos = binomial(ineq.len(), need);
        if combos > MAX_COMBINATIONS as f64 {
            return Err(Error::Size {
                what: "face vertex enumeration (basis combinations)",
                limit: MAX_COMBINATIONS,
            });
        }
        let feasible = |d: &[f64]| {
            eq.iter().all(|t| (dot(t, d) - 1.0).abs() <= 1e-9)
                && ineq.iter().all(|t| dot(t, d) <= 1.0 + 1e-9)
        };
        let mut vertices: Vec<Vec<f64>> = Vec::new();
        let mut sel: Vec<usize> = (0..need).collect();
        loop {
            if sel.len() == need && need <= ineq.len() {
                let a = DMatrix::from_fn(n, n, |r, c| {
                    if r < rows.len() {
                        rows[r].0[c]
                    } else {
                        ineq[sel[r - rows.len()]][c]
                    }
                });
                let b = DVector::from_fn(n, |r, _| if r < rows.len() { rows[r].1 } else { 1.0 });
                if let Some(d) = solve_square(&a, &b) {
                    let d: Vec<f64> = d.iter().copied().collect();
                    if feasible(&d) && !vertices.iter().any(|v| dist(v, &d) <= 1e-9 * (1.0 + norm(v))) {
                        vertices.push(d);
                        if vertices.len() > max_vertices {
                            return Err(Error::Size {
                                what: "face vertex enumeration (vertices)",
                                limit: max_vertices,
                            });
                        }
                    }
                }
            }
            if !next_combination(&mut sel, ineq.len()) {
                break;
            }
        }
        Ok(vertices)
    }

    /// Exact l2 radius of the largest ball around the anchor inside `C`.
    ///
    /// `C` is rebuilt from its generators (extreme points of `F`, active
    /// normals, and any lineality directions); each facet of that hull is a
    /// supporting hyperplane `<u, y> <= b`, and the radius is the smallest
    /// `b - <u, lambda x>` over facets, divided by lambda. The witness is the
    /// outward unit normal of the nearest facet. Exponential in the
    /// dimension; intended for small instances only.
    pub fn exact_l2_radius(&self, max_vertices: usize) -> Result<ExactRadiusResult> {
        let n = self.dim();
        let vertices = self.enumerate_face_vertices(max_vertices)?;
        if vertices.is_empty() {
            return Err(Error::CertificateUndefined("face has no extreme points".into()));
        }
        let lin = self.lineality();
        let mut rays = self.cone_generators();
        for c in 0..lin.ncols() {
            let v: Vec<f64> = lin.column(c).iter().copied().collect();
            rays.push(v.iter().map(|x| -x).collect());
            rays.push(v);
        }
        let y0: Vec<f64> = self.anchor.iter().map(|v| self.lambda * v).collect();
        let scale = 1.0 + vertices.iter().map(|v| norm(v)).fold(0.0, f64::max);
        let tol = 1e-9 * scale;

        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut facets: Vec<(Vec<f64>, f64)> = Vec::new();
        for (pi, p0) in vertices.iter().enumerate() {
            let dirs: Vec<Vec<f64>> = vertices
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != pi)
                .map(|(_, p)| p.iter().zip(p0).map(|(a, b)| a - b).collect())
                .chain(rays.iter().cloned())
                .collect();
            let k = n - 1;
            if binomial(dirs.len(), k) > MAX_COMBINATIONS as f64 {
                return Err(Error::Size {
                    what: "facet enumeration (direction combinations)",
                    limit: MAX_COMBINATIONS,
                });
            }
            let mut sel: Vec<usize> = (0..k).collect();
            loop {
                if k <= dirs.len() {
                    let mut normals = Vec::new();
                    if k == 0 {
                        normals.push(vec![1.0]);
                        normals.push(vec![-1.0]);
                    } else {
                        let a = DMatrix::from_fn(k, n, |r, c| dirs[sel[r]][c]);
                        let ns = null_space(&a, 1e-10);
                        if ns.ncols() == 1 {
                            let u: Vec<f64> = ns.column(0).iter().copied().collect();
                            normals.push(u.iter().map(|v| -v).collect());
                            normals.push(u);
                        }
                    }
                    for u in normals {
                        let b = dot(&u, p0);
                        let supports = vertices.iter().all(|p| dot(&u, p) <= b + tol)
                            && rays.iter().all(|r| dot(&u, r) <= tol);
                        if !supports || facets.iter().any(|(v, c)| dist(v, &u) <= 1e-9 && (c - b).abs() <= tol) {
                            continue;
                        }
                        let gap = b - dot(&u, &y0);
                        if best.as_ref().is_none_or(|(g, _)| gap < *g) {
                            best = Some((gap, u.clone()));
                        }
                        facets.push((u, b));
                    }
                }
                if !next_combination(&mut sel, dirs.len()) {
                    break;
                }
            }
        }
        match best {
            Some((gap, u)) => Ok(ExactRadiusResult {
                r0: gap.max(0.0) / self.lambda,
                witness_u: u,
                vertex_count: vertices.len(),
                facet_count: facets.len(),
            }),
            // Generators do not span a full-dimensional set: no interior.
            None => {
                let mut u = vec![0.0; n];
                u[0] = 1.0;
                Ok(ExactRadiusResult {
                    r0: 0.0,
                    witness_u: u,
                    vertex_count: vertices.len(),
                    facet_count: 0,
                })
            }
        }
    }

    /// Random x-space point `(f + v) / lambda` with `f` a strictly positive
    /// convex combination of `vertices` and `v = sum alpha_i t_i`,
    /// `alpha_i ~ U[0, alpha_max]`. Lineality directions (if any) get a
    /// uniform coefficient in `[-1, 1]`.
    pub fn sample_point<R: Rng + ?Sized>(&self, vertices: &[Vec<f64>], alpha_max: f64, rng: &mut R) -> Vec<f64> {
        let n = self.dim();
        let w: Vec<f64> = (0..vertices.len())
            .map(|_| -(1.0 - rng.random::<f64>()).ln())
            .collect();
        let wsum: f64 = w.iter().sum();
        let mut y = vec![0.0; n];
        for (v, wi) in vertices.iter().zip(&w) {
            crate::linalg::axpy(wi / wsum, v, &mut y);
        }
        for t in self.cone_generators() {
            crate::linalg::axpy(alpha_max * rng.random::<f64>(), &t, &mut y);
        }
        let lin = self.lineality();
        for c in 0..lin.ncols() {
            let coef = 2.0 * rng.random::<f64>() - 1.0;
            for r in 0..n {
                y[r] += coef * lin[(c, r).swap()];
            }
        }
        y.iter().map(|v| v / self.lambda).collect()
    }

    /// Serializable snapshot. Inequality rows are optional because they are
    /// `2M` vectors of length `n` and dominate the size at dictionary scale.
    pub fn to_document(&self, include_inequalities: bool) -> CertificateDocument {
        let m = self.dict.len();
        let signed = |j: usize| SignedColumn {
            index: j % m,
            sign: if j < m { 1 } else { -1 },
        };
        CertificateDocument {
            anchor: self.anchor.clone(),
            lambda: self.lambda,
            tau: self.active.tau,
            near_degenerate: self.active.near_degenerate,
            active: self.active.entries.clone(),
            dual_point: self.dual_point.clone(),
            equality_columns: self.eq_idx.iter().map(|&j| signed(j)).collect(),
            equality_normals: self.equality_normals(),
            inequality_columns: self.ineq_idx.iter().map(|&j| signed(j)).collect(),
            inequality_normals: include_inequalities.then(|| self.inequality_normals()),
        }
    }
}

trait Swap {
    fn swap(self) -> Self;
}

impl Swap for (usize, usize) {
    fn swap(self) -> Self {
        (self.1, self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedColumn {
    pub index: usize,
    pub sign: i8,
}

/// JSON form of a certificate. Normal vectors are rows (row-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateDocument {
    pub anchor: Vec<f64>,
    pub lambda: f64,
    pub tau: f64,
    pub near_degenerate: bool,
    pub active: Vec<ActiveEntry>,
    pub dual_point: Vec<f64>,
    pub equality_columns: Vec<SignedColumn>,
    pub equality_normals: Vec<Vec<f64>>,
    pub inequality_columns: Vec<SignedColumn>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub inequality_normals: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactRadiusResult {
    /// Radius in x-space.
    pub r0: f64,
    /// Outward unit normal of the facet closest to the anchor.
    pub witness_u: Vec<f64>,
    pub vertex_count: usize,
    pub facet_count: usize,
}

fn cols_matrix(dict: &Dictionary, idx: &[usize]) -> DMatrix<f64> {
    let n = dict.dim();
    let m = dict.len();
    DMatrix::from_fn(n, idx.len(), |r, c| {
        let j = idx[c];
        if j < m {
            dict.column(j)[r]
        } else {
            -dict.column(j - m)[r]
        }
    })
}

fn orthogonal_residual(basis: &[Vec<f64>], v: &[f64]) -> Option<Vec<f64>> {
    let mut r = v.to_vec();
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, &r);
            crate::linalg::axpy(-c, q, &mut r);
        }
    }
    let nr = norm(&r);
    (nr > 1e-10 * norm(v).max(1e-300)).then(|| r.iter().map(|x| x / nr).collect())
}

fn solve_square(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    let s = &svd.singular_values;
    if s.min() <= 1e-10 * s.max().max(1e-300) {
        return None;
    }
    svd.solve(b, 0.0).ok()
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Advances `sel` to the next k-combination of `0..n` in lexicographic order.
pub(crate) fn next_combination(sel: &mut [usize], n: usize) -> bool {
    let k = sel.len();
    if k == 0 || k > n {
        return false;
    }
    let mut i = k;
    while i > 0 {
        i -= 1;
        if sel[i] < n - k + i {
            sel[i] += 1;
            for j in i + 1..k {
                sel[j] = sel[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Output of one projection (lambda space unless converted by the caller).
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub point: Vec<f64>,
    /// Cone weights `alpha` and face point `d` with `point = A1 alpha + d`.
    pub alpha: Vec<f64>,
    pub face_point: Vec<f64>,
    /// Smallest of `alpha_i` and the inequality slacks `1 - <t_j, d>`.
    pub boundary_slack: f64,
    pub iterations: usize,
    pub polished: bool,
}

/// Operator-splitting solver for
/// `min_{alpha >= 0, d} ||y - A1 alpha - d||^2  s.t.  A1^T d = 1, A2^T d <= 1`,
/// with the KKT factorization cached across calls for one certificate.
///
/// Iterations follow the OSQP scheme (relaxed ADMM on `l <= C z <= u`);
/// after convergence the guessed active constraints are solved exactly and
/// kept when the result passes a full KKT check.
#[derive(Debug, Clone)]
pub struct Projector {
    a1: DMatrix<f64>,
    a2: DMatrix<f64>,
    p: DMatrix<f64>,
    c: DMatrix<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    tol: f64,
    max_iter: usize,
}

const SIGMA: f64 = 1e-6;
const RELAX: f64 = 1.6;
const RHO0: f64 = 0.1;
const EQ_RHO_SCALE: f64 = 1e3;

impl Projector {
    pub fn new(a1: DMatrix<f64>, a2: DMatrix<f64>, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return arg(format!("projection tolerance must be positive, got {tol}"));
        }
        let n = a1.nrows();
        let k = a1.ncols();
        let q = a2.ncols();
        let nz = k + n;
        let mut b = DMatrix::zeros(n, nz);
        b.view_mut((0, 0), (n, k)).copy_from(&a1);
        b.view_mut((0, k), (n, n)).fill_with_identity();
        let p = b.tr_mul(&b);
        let mut c = DMatrix::zeros(2 * k + q, nz);
        c.view_mut((0, 0), (k, k)).fill_with_identity();
        c.view_mut((k, k), (k, n)).copy_from(&a1.transpose());
        c.view_mut((2 * k, k), (q, n)).copy_from(&a2.transpose());
        let mut lower = vec![0.0; k];
        lower.extend(std::iter::repeat_n(1.0, k));
        lower.extend(std::iter::repeat_n(f64::NEG_INFINITY, q));
        let mut upper = vec![f64::INFINITY; k];
        upper.extend(std::iter::repeat_n(1.0, k + q));
        Ok(Projector {
            a1,
            a2,
            p,
            c,
            lower,
            upper,
            tol,
            max_iter: 100_000,
        })
    }

    fn rho_vec(&self, rho: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.lower.len(),
            self.lower
                .iter()
                .zip(&self.upper)
                .map(|(l, u)| if l == u { rho * EQ_RHO_SCALE } else { rho }),
        )
    }

    fn factor(&self, rho: &DVector<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
        let nz = self.p.nrows();
        let mut crc = self.c.clone();
        for (mut row, r) in crc.row_iter_mut().zip(rho.iter()) {
            row *= *r;
        }
        let k = &self.p + DMatrix::identity(nz, nz) * SIGMA + self.c.tr_mul(&crc);
        k.cholesky().ok_or(Error::Projection {
            primal: f64::NAN,
            dual: f64::NAN,
        })
    }

    fn split(&self, z: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
        let k = self.a1.ncols();
        (
            z.rows(0, k).iter().copied().collect(),
            z.rows(k, z.len() - k).iter().copied().collect(),
        )
    }

    /// Exact test for `y` in `C` when the equality normals are independent:
    /// `y = A1 alpha + d` then forces `alpha = (A1^T A1)^{-1} (A1^T y - 1)`.
    fn interior(&self, y: &[f64]) -> Option<Projection> {
        let k = self.a1.ncols();
        let yv = DVector::from_column_slice(y);
        let rhs = self.a1.tr_mul(&yv).add_scalar(-1.0);
        let alpha = if k == 0 {
            DVector::zeros(0)
        } else {
            self.a1.tr_mul(&self.a1).cholesky()?.solve(&rhs)
        };
        let d = &yv - &self.a1 * &alpha;
        let scale = 1.0 + yv.amax();
        if (self.a1.tr_mul(&d).add_scalar(-1.0)).amax() > 1e-12 * scale {
            return None;
        }
        let slack_ineq = self.a2.tr_mul(&d).iter().fold(f64::INFINITY, |m, v| m.min(1.0 - v));
        let slack_alpha = alpha.iter().copied().fold(f64::INFINITY, f64::min);
        let slack = slack_ineq.min(slack_alpha);
        (slack >= 0.0).then(|| Projection {
            point: y.to_vec(),
            alpha: alpha.iter().copied().collect(),
            face_point: d.iter().copied().collect(),
            boundary_slack: slack,
            iterations: 0,
            polished: true,
        })
    }

    /// Projects `y` (lambda space).
    pub fn project(&self, y: &[f64]) -> Result<Projection> {
        if let Some(p) = self.interior(y) {
            return Ok(p);
        }
        let n = self.a1.nrows();
        let k = self.a1.ncols();
        let nz = k + n;
        let mc = self.lower.len();
        let yv = DVector::from_column_slice(y);
        let q = -DVector::from_iterator(nz, self.a1.tr_mul(&yv).iter().copied().chain(yv.iter().copied()));

        let mut rho = RHO0;
        let mut rv = self.rho_vec(rho);
        let mut chol = self.factor(&rv)?;
        // start from the unconstrained-friendly guess z = (0, y)
        let mut z = DVector::from_iterator(nz, std::iter::repeat_n(0.0, k).chain(y.iter().copied()));
        let mut w = &self.c * &z;
        for (wi, (l, u)) in w.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *wi = wi.clamp(*l, *u);
        }
        let mut mu = DVector::zeros(mc);
        let (mut rp, mut rd) = (f64::INFINITY, f64::INFINITY);
        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.max_iter {
            iterations += 1;
            let rhs = &z * SIGMA - &q + self.c.tr_mul(&(rv.component_mul(&w) - &mu));
            let zt = chol.solve(&rhs);
            let wt = &self.c * &zt;
            z = &zt * RELAX + &z * (1.0 - RELAX);
            let w_hat = &wt * RELAX + &w * (1.0 - RELAX);
            let mut w_new = &w_hat + mu.component_div(&rv);
            for (wi, (l, u)) in w_new.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
                *wi = wi.clamp(*l, *u);
            }
            mu += rv.component_mul(&(&w_hat - &w_new));
            w = w_new;

            if iterations % 10 == 0 {
                let cz = &self.c * &z;
                let pz = &self.p * &z;
                let ctmu = self.c.tr_mul(&mu);
                rp = (&cz - &w).amax();
                rd = (&pz + &q + &ctmu).amax();
                let sp = cz.amax().max(w.amax());
                let sd = pz.amax().max(ctmu.amax()).max(q.amax());
                if rp <= self.tol * (1.0 + sp) && rd <= self.tol * (1.0 + sd) {
                    converged = true;
                    break;
                }
                if iterations % 100 == 0 {
                    let ratio = ((rp / sp.max(1e-30)) / (rd / sd.max(1e-30)).max(1e-30)).sqrt();
                    if !(0.2..=5.0).contains(&ratio) && ratio.is_finite() {
                        rho = (rho * ratio).clamp(1e-6, 1e6);
                        rv = self.rho_vec(rho);
                        chol = self.factor(&rv)?;
                    }
                }
            }
        }

        let polished = self.polish(&q, &z, &w, &mu);
        let (z, was_polished) = match polished {
            Some(zp) => (zp, true),
            None if converged => (z, false),
            None => return Err(Error::Projection { primal: rp, dual: rd }),
        };
        let (alpha, d) = self.split(&z);
        let mut point = d.clone();
        for (j, a) in alpha.iter().enumerate() {
            for r in 0..n {
                point[r] += a * self.a1[(r, j)];
            }
        }
        let dv = DVector::from_column_slice(&d);
        let slack_ineq = self.a2.tr_mul(&dv).iter().fold(f64::INFINITY, |m, v| m.min(1.0 - v));
        let slack_alpha = alpha.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Projection {
            point,
            alpha,
            face_point: d,
            boundary_slack: slack_ineq.min(slack_alpha),
            iterations,
            polished: was_polished,
        })
    }

    /// Solves the equality-constrained problem on the guessed active rows and
    /// accepts it only if it is primal and dual feasible to 1e-9.
    fn polish(&self, q: &DVector<f64>, z: &DVector<f64>, w: &DVector<f64>, mu: &DVector<f64>) -> Option<DVector<f64>> {
        let nz = z.len();
        let mut rows = Vec::new(); // (row, rhs, kind) kind: 0 eq, 1 upper, -1 lower
        for i in 0..self.lower.len() {
            let (l, u) = (self.lower[i], self.upper[i]);
            if l == u {
                rows.push((i, u, 0i8));
            } else if u - w[i] < mu[i] {
                rows.push((i, u, 1));
            } else if w[i] - l < -mu[i] {
                rows.push((i, l, -1));
            }
        }
        let na = rows.len();
        let dim = nz + na;
        let delta = 1e-10;
        let mut kkt = DMatrix::zeros(dim, dim);
        kkt.view_mut((0, 0), (nz, nz)).copy_from(&self.p);
        for (a, &(i, _, _)) in rows.iter().enumerate() {
            for c in 0..nz {
                let v = self.c[(i, c)];
                kkt[(nz + a, c)] = v;
                kkt[(c, nz + a)] = v;
            }
        }
        let mut reg = kkt.clone();
        for i in 0..nz {
            reg[(i, i)] += delta;
        }
        for a in 0..na {
            reg[(nz + a, nz + a)] -= delta;
        }
        let lu = reg.lu();
        let rhs = DVector::from_iterator(dim, (-q).iter().copied().chain(rows.iter().map(|r| r.1)));
        let mut sol = lu.solve(&rhs)?;
        for _ in 0..10 {
            let res = &rhs - &kkt * &sol;
            if res.amax() < 1e-14 {
                break;
            }
            sol += lu.solve(&res)?;
        }
        if (&rhs - &kkt * &sol).amax() > 1e-9 || sol.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let zp = sol.rows(0, nz).into_owned();
        let cz = &self.c * &zp;
        let feas = cz
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *v >= l - 1e-9 && *v <= u + 1e-9);
        let signs = rows
            .iter()
            .enumerate()
            .all(|(a, r)| match r.2 {
                1 => sol[nz + a] >= -1e-9,
                -1 => sol[nz + a] <= 1e-9,
                _ => true,
            });
        (feas && signs).then_some(zp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bpdn::{active_set, solve, DualProblemInstance, Sign, SolverOptions, DEFAULT_TAU};
    use approx::assert_abs_diff_eq;

    fn eye2() -> Dictionary {
        Dictionary::from_columns(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![0, 1], 2).unwrap()
    }

    fn cert_at<'d>(dict: &'d Dictionary, x: &[f64], lambda: f64) -> CertificatePolyhedron<'d> {
        let sol = solve(&DualProblemInstance::new(dict, x, lambda).unwrap(), &SolverOptions::default()).unwrap();
        let a = active_set(&sol, DEFAULT_TAU).unwrap();
        build_certificate(dict, &sol, &a).unwrap()
    }

    #[test]
    fn two_dimensional_face() {
        let dict = eye2();
        let c = cert_at(&dict, &[0.5, 0.0], 4.0);
        assert_eq!(c.equality_normals(), vec![vec![1.0, 0.0]]);
        let mut ineq = c.inequality_normals();
        ineq.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(ineq, vec![vec![-1.0, 0.0], vec![-0.0, -1.0], vec![0.0, 1.0]]);
        assert_eq!(c.cone_generators(), c.equality_normals());
    }

    #[test]
    fn rejects_empty_and_contradictory_sets() {
        let dict = eye2();
        let sol = solve(&DualProblemInstance::new(&dict, &[0.5, 0.0], 1.0).unwrap(), &SolverOptions::default()).unwrap();
        let empty = active_set(&sol, DEFAULT_TAU).unwrap();
        assert!(matches!(build_certificate(&dict, &sol, &empty), Err(Error::CertificateUndefined(_))));

        let sol = solve(&DualProblemInstance::new(&dict, &[0.5, 0.0], 4.0).unwrap(), &SolverOptions::default()).unwrap();
        let all = ActiveSet {
            entries: (0..2)
                .flat_map(|i| [ActiveEntry { index: i, sign: Sign::Plus }, ActiveEntry { index: i, sign: Sign::Minus }])
                .collect(),
            tau: DEFAULT_TAU,
            near_degenerate: false,
        };
        assert!(matches!(build_certificate(&dict, &sol, &all), Err(Error::CertificateUndefined(_))));
    }

    #[test]
    fn membership_examples() {
        let dict = eye2();
        let c = cert_at(&dict, &[0.5, 0.0], 4.0);
        assert!(c.contains(&[0.5, 0.0], DEFAULT_MEMBERSHIP_TOL).unwrap());
        assert!(c.contains(&[0.3, 0.1], DEFAULT_MEMBERSHIP_TOL).unwrap());
        assert!(!c.contains(&[0.3, 0.3], DEFAULT_MEMBERSHIP_TOL).unwrap());
        let m = c.membership(&[0.25, 0.1], DEFAULT_MEMBERSHIP_TOL).unwrap();
        assert!(m.inside && m.on_boundary);
        let m = c.membership(&[0.3, 0.1], DEFAULT_MEMBERSHIP_TOL).unwrap();
        assert!(m.inside && !m.on_boundary);
    }

    #[test]
    fn projection_clamps_axis_aligned_region() {
        let dict = eye2();
        let c = cert_at(&dict, &[0.5, 0.0], 4.0);
        let p = c.project_onto(&[0.125, 0.5], DEFAULT_PROJECTION_TOL).unwrap();
        assert_abs_diff_eq!(p[0], 0.25, epsilon = 1e-9);
        assert_abs_diff_eq!(p[1], 0.25, epsilon = 1e-9);
        let inside = [0.4, -0.1];
        let p = c.project_onto(&inside, DEFAULT_PROJECTION_TOL).unwrap();
        assert!(dist(&p, &inside) < 1e-10);
    }

    #[test]
    fn face_vertices() {
        let dict = eye2();
        let c = cert_at(&dict, &[0.5, 0.0], 4.0);
        let mut v = c.enumerate_face_vertices(100).unwrap();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(v.len(), 2);
        assert_abs_diff_eq!(v[0][0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[0][1], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1][1], 1.0, epsilon = 1e-12);

        let c = cert_at(&dict, &[0.3, 0.3], 4.0);
        let v = c.enumerate_face_vertices(100).unwrap();
        assert_eq!(v.len(), 1);
        assert_abs_diff_eq!(v[0][0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[0][1], 1.0, epsilon = 1e-12);

        assert!(matches!(
            cert_at(&dict, &[0.5, 0.0], 4.0).enumerate_face_vertices(1),
            Err(Error::Size { .. })
        ));
    }

    #[test]
    fn radius_of_axis_aligned_region() {
        let dict = eye2();
        let c = cert_at(&dict, &[0.5, 0.0], 4.0);
        let r = c.exact_l2_radius(100).unwrap();
        assert_abs_diff_eq!(r.r0, 0.25, epsilon = 1e-9);
        assert_abs_diff_eq!(norm(&r.witness_u), 1.0, epsilon = 1e-9);

        // anchor on the facet x1 = 1/4 of the same region
        let c = cert_at(&dict, &[0.25, 0.0], 4.0);
        let r = c.exact_l2_radius(100).unwrap();
        assert_abs_diff_eq!(r.r0, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn rank_deficient_dictionary_has_lineality() {
        // both atoms in the x1-x2 plane of R^3
        let dict = Dictionary::from_columns(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]], vec![0, 1], 2).unwrap();
        let c = cert_at(&dict, &[0.5, 0.0, 0.3], 4.0);
        // C = {x1 >= 1/4, |x2| <= 1/4} x R in x-space
        assert!(c.contains(&[0.3, 0.1, 50.0], DEFAULT_MEMBERSHIP_TOL).unwrap());
        assert!(!c.contains(&[0.3, 0.3, 0.0], DEFAULT_MEMBERSHIP_TOL).unwrap());
        let r = c.exact_l2_radius(100).unwrap();
        assert_abs_diff_eq!(r.r0, 0.25, epsilon = 1e-9);
    }

    #[test]
    fn combinations_enumerate_all() {
        let mut sel = vec![0, 1];
        let mut count = 1;
        while next_combination(&mut sel, 5) {
            count += 1;
        }
        assert_eq!(count, 10);
        assert_eq!(binomial(5, 2), 10.0);
        assert!(!next_combination(&mut [], 3));
    }
}
