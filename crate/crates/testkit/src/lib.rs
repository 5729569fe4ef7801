//! Slow, obviously-correct reference computations for tests.
//!
//! Nothing here depends on `dualcert`: inputs are plain vectors so the
//! oracles cannot share a bug with the code they check.

use nalgebra::{DMatrix, DVector};
use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Vector = Vec<f64>;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Calls `f` on every subset of `0..n` with at most `max_size` elements.
pub fn for_each_subset(n: usize, max_size: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, left: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        f(cur);
        if left == 0 {
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, left - 1, cur, f);
            cur.pop();
        }
    }
    rec(0, n, max_size, &mut Vec::new(), f);
}

/// Minimum-norm solution of a linear system by SVD, if it is consistent.
fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Some(DVector::zeros(a.ncols()));
    }
    let svd = a.clone().svd(true, true);
    let x = svd.solve(b, 1e-12).ok()?;
    ((a * &x - b).amax() <= 1e-9).then_some(x)
}

/// Soft-thresholding solution for an orthonormal dictionary:
/// `c_i = sign(<s_i,x>) max(0, |<s_i,x>| - 1/lambda)`.
pub fn soft_threshold_coefficients(columns: &[Vector], x: &[f64], lambda: f64) -> Vector {
    columns
        .iter()
        .map(|s| {
            let r = dot(s, x);
            r.signum() * (r.abs() - 1.0 / lambda).max(0.0)
        })
        .collect()
}

/// Projection of `y` onto `{d : |<s_i, d>| <= 1}` by enumerating which
/// signed constraints are tight.
///
/// For each candidate tight set `J` the nearest point of the affine set
/// `{t_j^T d = 1, j in J}` is computed; the answer is the feasible candidate
/// closest to `y`.
pub fn project_dual_polytope(columns: &[Vector], y: &[f64]) -> Vector {
    let n = y.len();
    let signed: Vec<Vector> = columns
        .iter()
        .cloned()
        .chain(columns.iter().map(|c| c.iter().map(|v| -v).collect()))
        .collect();
    let feasible = |d: &[f64]| columns.iter().all(|s| dot(s, d).abs() <= 1.0 + 1e-9);
    let mut best: Option<(f64, Vector)> = None;
    for_each_subset(signed.len(), n, &mut |set| {
        let a = DMatrix::from_fn(set.len(), n, |r, c| signed[set[r]][c]);
        let yv = DVector::from_column_slice(y);
        // d = y - A^T mu with A A^T mu = A y - 1
        let rhs = &a * &yv - DVector::from_element(set.len(), 1.0);
        let Some(mu) = lstsq(&(&a * a.transpose()), &rhs) else {
            return;
        };
        let d: Vector = (yv - a.transpose() * mu).iter().copied().collect();
        if !feasible(&d) {
            return;
        }
        let dd = dist(&d, y);
        if best.as_ref().is_none_or(|(b, _)| dd < *b) {
            best = Some((dd, d));
        }
    });
    best.expect("the empty tight set or some face always yields a candidate").1
}

/// Projection of `y` onto `{A1 alpha + d : alpha >= 0, A1^T d = 1, A2^T d <= 1}`
/// by enumerating which `alpha_i` vanish and which inequalities are tight.
/// Returns the projected point.
pub fn project_certificate(eq: &[Vector], ineq: &[Vector], y: &[f64]) -> Option<Vector> {
    let n = y.len();
    let k = eq.len();
    let nz = k + n;
    let yv = DVector::from_column_slice(y);
    let mut best: Option<(f64, Vector)> = None;
    for_each_subset(k, k, &mut |zero_alpha| {
        for_each_subset(ineq.len(), n, &mut |tight| {
            // rows: alpha_i = 0, eq normals, tight inequalities
            let m = zero_alpha.len() + k + tight.len();
            let mut c = DMatrix::zeros(m, nz);
            let mut b = DVector::zeros(m);
            for (r, &i) in zero_alpha.iter().enumerate() {
                c[(r, i)] = 1.0;
            }
            for j in 0..k {
                let r = zero_alpha.len() + j;
                for t in 0..n {
                    c[(r, k + t)] = eq[j][t];
                }
                b[r] = 1.0;
            }
            for (j, &i) in tight.iter().enumerate() {
                let r = zero_alpha.len() + k + j;
                for t in 0..n {
                    c[(r, k + t)] = ineq[i][t];
                }
                b[r] = 1.0;
            }
            // min ||B z - y||^2 s.t. C z = b via the KKT system
            let mut bmat = DMatrix::zeros(n, nz);
            for j in 0..k {
                for t in 0..n {
                    bmat[(t, j)] = eq[j][t];
                }
            }
            for t in 0..n {
                bmat[(t, k + t)] = 1.0;
            }
            let p = bmat.transpose() * &bmat;
            let q = bmat.transpose() * &yv;
            let mut kkt = DMatrix::zeros(nz + m, nz + m);
            kkt.view_mut((0, 0), (nz, nz)).copy_from(&p);
            kkt.view_mut((0, nz), (nz, m)).copy_from(&c.transpose());
            kkt.view_mut((nz, 0), (m, nz)).copy_from(&c);
            let mut rhs = DVector::zeros(nz + m);
            rhs.rows_mut(0, nz).copy_from(&q);
            rhs.rows_mut(nz, m).copy_from(&b);
            let Some(sol) = lstsq(&kkt, &rhs) else {
                return;
            };
            let z = sol.rows(0, nz);
            let alpha: Vec<f64> = z.rows(0, k).iter().copied().collect();
            let d: Vec<f64> = z.rows(k, n).iter().copied().collect();
            let ok = alpha.iter().all(|a| *a >= -1e-9)
                && eq.iter().all(|t| (dot(t, &d) - 1.0).abs() <= 1e-9)
                && ineq.iter().all(|t| dot(t, &d) <= 1.0 + 1e-9);
            if !ok {
                return;
            }
            let point: Vector = (&bmat * z).iter().copied().collect();
            let dd = dist(&point, y);
            if best.as_ref().is_none_or(|(b, _)| dd < *b - 1e-12) {
                best = Some((dd, point));
            }
        });
    });
    best.map(|b| b.1)
}

/// Exact rational vertex enumeration of `{d in Q^2 : <e, d> = 1 for e in eq,
/// <a, d> <= 1 for a in ineq}`, deduplicated and sorted.
pub fn rational_vertices_2d(eq: &[[Rational64; 2]], ineq: &[[Rational64; 2]]) -> Vec<[Rational64; 2]> {
    let one = Rational64::from_integer(1);
    let zero = Rational64::from_integer(0);
    let rows: Vec<([Rational64; 2], bool)> = eq.iter().map(|r| (*r, true)).chain(ineq.iter().map(|r| (*r, false))).collect();
    let feasible = |d: &[Rational64; 2]| {
        eq.iter().all(|e| e[0] * d[0] + e[1] * d[1] == one) && ineq.iter().all(|a| a[0] * d[0] + a[1] * d[1] <= one)
    };
    let mut out: Vec<[Rational64; 2]> = Vec::new();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let (a, b) = (rows[i].0, rows[j].0);
            let det = a[0] * b[1] - a[1] * b[0];
            if det == zero {
                continue;
            }
            let d = [(b[1] - a[1]) / det, (a[0] - b[0]) / det];
            if feasible(&d) && !out.contains(&d) {
                out.push(d);
            }
        }
    }
    out.sort();
    out
}

/// Monte-Carlo fraction of the unit sphere in `R^n` within angle `alpha` of
/// a pole.
pub fn monte_carlo_cap(n: usize, alpha: f64, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = alpha.cos();
    let mut hits = 0usize;
    let mut v = vec![0.0; n];
    for _ in 0..samples {
        for x in v.iter_mut() {
            *x = gaussian(&mut rng);
        }
        let nv = dot(&v, &v).sqrt();
        if v[0] / nv >= c {
            hits += 1;
        }
    }
    hits as f64 / samples as f64
}

fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// `erf` by its Maclaurin series; accurate for `|x| <= 3`.
pub fn erf_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = x;
    for k in 0..200 {
        sum += term / (2 * k + 1) as f64;
        term *= -x * x / (k + 1) as f64;
    }
    2.0 / std::f64::consts::PI.sqrt() * sum
}

/// Standard normal quantile by bisection on the series CDF.
pub fn normal_quantile_bisect(p: f64) -> f64 {
    let cdf = |z: f64| 0.5 * (1.0 + erf_series(z / std::f64::consts::SQRT_2));
    let (mut lo, mut hi) = (-6.0f64, 6.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Searches a square grid of half-width `radius` around `center` (2D) for a
/// point accepted by `pred`.
pub fn grid_search_2d(center: [f64; 2], radius: f64, steps: usize, pred: impl Fn([f64; 2]) -> bool) -> Option<[f64; 2]> {
    for i in 0..=steps {
        for j in 0..=steps {
            let p = [
                center[0] - radius + 2.0 * radius * i as f64 / steps as f64,
                center[1] - radius + 2.0 * radius * j as f64 / steps as f64,
            ];
            if pred(p) {
                return Some(p);
            }
        }
    }
    None
}

/// Greedy concentration sets by brute force: rank points by decreasing
/// global nearest-neighbour distance (ties by index), keep the first `m` of
/// each class, and report `(min cross-class distance, min class mass)`.
pub fn greedy_concentration(points: &[Vector], labels: &[usize], m: usize) -> (f64, f64) {
    let n = points.len();
    let nn: Vec<f64> = (0..n)
        .map(|i| {
            let mut best = f64::INFINITY;
            for j in 0..n {
                if i != j {
                    best = best.min(dist(&points[i], &points[j]));
                }
            }
            best
        })
        .collect();
    let mut idx: Vec<usize> = (0..n).collect();
    // insertion sort keeps equal keys in index order
    for a in 1..n {
        let mut b = a;
        while b > 0 && nn[idx[b - 1]] < nn[idx[b]] {
            idx.swap(b - 1, b);
            b -= 1;
        }
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut chosen = vec![Vec::new(); classes];
    let mut sizes = vec![0usize; classes];
    for &l in labels {
        sizes[l] += 1;
    }
    for &i in &idx {
        if chosen[labels[i]].len() < m {
            chosen[labels[i]].push(i);
        }
    }
    let mut eps = f64::INFINITY;
    for a in 0..classes {
        for b in 0..classes {
            if a != b {
                for &i in &chosen[a] {
                    for &j in &chosen[b] {
                        eps = eps.min(dist(&points[i], &points[j]));
                    }
                }
            }
        }
    }
    let mass = (0..classes)
        .filter(|&c| sizes[c] > 0)
        .map(|c| chosen[c].len() as f64 / sizes[c] as f64)
        .fold(1.0, f64::min);
    (eps, mass)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polytope_projection_of_square() {
        let cols = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let p = project_dual_polytope(&cols, &[2.0, 0.5]);
        assert!(dist(&p, &[1.0, 0.5]) < 1e-12);
        let p = project_dual_polytope(&cols, &[2.0, -3.0]);
        assert!(dist(&p, &[1.0, -1.0]) < 1e-12);
    }

    #[test]
    fn certificate_projection_of_axis_region() {
        // C = {u >= 1, |v| <= 1}
        let eq = vec![vec![1.0, 0.0]];
        let ineq = vec![vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
        let p = project_certificate(&eq, &ineq, &[0.5, 2.0]).unwrap();
        assert!(dist(&p, &[1.0, 1.0]) < 1e-9);
        let p = project_certificate(&eq, &ineq, &[3.0, 0.2]).unwrap();
        assert!(dist(&p, &[3.0, 0.2]) < 1e-9);
    }

    #[test]
    fn rational_segment() {
        let r = |a: i64, b: i64| Rational64::new(a, b);
        let v = rational_vertices_2d(&[[r(1, 1), r(0, 1)]], &[[r(0, 1), r(1, 1)], [r(0, 1), r(-1, 1)], [r(0, 1), r(1, 1)]]);
        assert_eq!(v, vec![[r(1, 1), r(-1, 1)], [r(1, 1), r(1, 1)]]);
    }

    #[test]
    fn greedy_line_example() {
        let pts = vec![vec![0.0], vec![1.0], vec![3.0], vec![7.0]];
        assert_eq!(greedy_concentration(&pts, &[0, 0, 1, 1], 1), (7.0, 0.5));
        assert_eq!(greedy_concentration(&pts, &[0, 0, 1, 1], 2), (2.0, 1.0));
    }

    #[test]
    fn series_quantile() {
        assert!((normal_quantile_bisect(0.975) - 1.959964).abs() < 1e-6);
    }
}
