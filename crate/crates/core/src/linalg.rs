//! Small dense vector helpers shared across modules.

use nalgebra::{DMatrix, DVector};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| alpha * v).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Euclidean projection onto the ball `B(center, radius)`.
pub fn project_ball(point: &[f64], center: &[f64], radius: f64) -> Vec<f64> {
    let d = dist(point, center);
    if d <= radius {
        return point.to_vec();
    }
    let s = radius / d;
    center
        .iter()
        .zip(point)
        .map(|(c, p)| c + s * (p - c))
        .collect()
}

/// Orthonormal basis (as columns) of the null space of `a`, by SVD.
pub fn null_space(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let (rows, cols) = a.shape();
    if rows == 0 {
        return DMatrix::identity(cols, cols);
    }
    // Pad to a square matrix so the full right singular basis is available.
    let mut sq = DMatrix::zeros(cols.max(rows), cols);
    sq.view_mut((0, 0), (rows, cols)).copy_from(a);
    let svd = sq.svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    let smax = svd.singular_values.max();
    let tol = rel_tol * smax.max(1.0);
    let null: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= tol)
        .map(|(i, _)| vt.row(i).transpose())
        .collect();
    if null.is_empty() {
        DMatrix::zeros(cols, 0)
    } else {
        DMatrix::from_columns(&null)
    }
}

/// Numerical rank by SVD.
pub fn rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let s = a.clone().svd(false, false).singular_values;
    let tol = rel_tol * s.max().max(1.0);
    s.iter().filter(|v| **v > tol).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_plane_normal() {
        let a = DMatrix::from_row_slice(1, 3, &[0.0, 0.0, 2.0]);
        let n = null_space(&a, 1e-12);
        assert_eq!(n.ncols(), 2);
        assert!((&a * &n).norm() < 1e-12);
        assert_eq!(rank(&a, 1e-12), 1);
        let empty = DMatrix::<f64>::zeros(0, 2);
        assert_eq!(null_space(&empty, 1e-12).ncols(), 2);
    }

    #[test]
    fn ball_projection() {
        let p = project_ball(&[3.0, 4.0], &[0.0, 0.0], 1.0);
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        assert_eq!(project_ball(&[0.1, 0.1], &[0.0, 0.0], 1.0), vec![0.1, 0.1]);
    }
}
