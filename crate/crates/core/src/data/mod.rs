//! Labeled datasets, union-of-subspaces models and training dictionaries.

pub mod idx;

use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{arg, Error, Result};
use crate::linalg::{dot, norm};
use crate::numerics::{gaussian_vec, RngSeed};

/// Side length MNIST images are resampled to (n = 1024).
pub const IMAGE_SIDE: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    points: Vec<Vec<f64>>,
    labels: Vec<usize>,
    dim: usize,
    num_classes: usize,
}

impl LabeledDataset {
    pub fn new(points: Vec<Vec<f64>>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if points.len() != labels.len() {
            return arg(format!("{} points but {} labels", points.len(), labels.len()));
        }
        let dim = points.first().map_or(0, Vec::len);
        if let Some(i) = points.iter().position(|p| p.len() != dim) {
            return arg(format!("point {i} has dimension {}, expected {dim}", points[i].len()));
        }
        if let Some(i) = labels.iter().position(|&l| l >= num_classes) {
            return arg(format!("label {} at index {i} out of range 0..{num_classes}", labels[i]));
        }
        Ok(LabeledDataset {
            points,
            labels,
            dim,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// Sub-dataset with the given indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            dim: self.dim,
            num_classes: self.num_classes,
        }
    }

    /// First `n` points (or all of them).
    pub fn head(&self, n: usize) -> LabeledDataset {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.select(&idx)
    }
}

/// Training matrix `S` with unit-norm columns and their labels.
///
/// The signed view `T = [S, -S]` is never materialized: signed column `j`
/// is `+s_j` for `j < M` and `-s_{j-M}` otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: DMatrix<f64>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl Dictionary {
    /// Builds a dictionary, scaling every column to unit l2 norm.
    pub fn from_columns(columns: &[Vec<f64>], labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if columns.is_empty() {
            return arg("dictionary needs at least one column");
        }
        if columns.len() != labels.len() {
            return arg(format!("{} columns but {} labels", columns.len(), labels.len()));
        }
        let n = columns[0].len();
        if n == 0 {
            return arg("dictionary columns must be nonempty");
        }
        let mut data = Vec::with_capacity(n * columns.len());
        for (i, c) in columns.iter().enumerate() {
            if c.len() != n {
                return arg(format!("column {i} has dimension {}, expected {n}", c.len()));
            }
            let nrm = norm(c);
            if !(nrm > 0.0) || !nrm.is_finite() {
                return arg(format!("column {i} has zero or non-finite norm"));
            }
            data.extend(c.iter().map(|v| v / nrm));
        }
        if let Some(i) = labels.iter().position(|&l| l >= num_classes) {
            return arg(format!("label {} at index {i} out of range 0..{num_classes}", labels[i]));
        }
        Ok(Dictionary {
            atoms: DMatrix::from_vec(n, columns.len(), data),
            labels,
            num_classes,
        })
    }

    /// Ambient dimension n.
    pub fn dim(&self) -> usize {
        self.atoms.nrows()
    }

    /// Number of training columns M.
    pub fn len(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.ncols() == 0
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.atoms
    }

    /// Column `s_i`.
    pub fn column(&self, i: usize) -> &[f64] {
        let n = self.dim();
        &self.atoms.as_slice()[i * n..(i + 1) * n]
    }

    /// Column `j` of `T = [S, -S]`, `j < 2M`.
    pub fn signed_column(&self, j: usize) -> Vec<f64> {
        let m = self.len();
        if j < m {
            self.column(j).to_vec()
        } else {
            self.column(j - m).iter().map(|v| -v).collect()
        }
    }

    /// `S^T v`.
    pub fn correlations(&self, v: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|i| dot(self.column(i), v)).collect()
    }

    /// `S c`.
    pub fn combine(&self, coef: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (i, &c) in coef.iter().enumerate() {
            if c != 0.0 {
                crate::linalg::axpy(c, self.column(i), &mut out);
            }
        }
        out
    }
}

/// Union of `K` linear subspaces given by orthonormal bases, plus an
/// expansion width `gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceModel {
    bases: Vec<DMatrix<f64>>,
    gamma: f64,
}

impl SubspaceModel {
    pub fn new(bases: Vec<DMatrix<f64>>, gamma: f64) -> Result<Self> {
        if bases.is_empty() {
            return Err(Error::Model("at least one subspace is required".into()));
        }
        if !(gamma >= 0.0) {
            return Err(Error::Model(format!("gamma must be nonnegative, got {gamma}")));
        }
        let n = bases[0].nrows();
        for (k, u) in bases.iter().enumerate() {
            if u.nrows() != n {
                return Err(Error::Model(format!("basis {k} has {} rows, expected {n}", u.nrows())));
            }
            if u.ncols() == 0 || u.ncols() >= n {
                return Err(Error::Model(format!(
                    "subspace dimension must satisfy 0 < d < n (basis {k}: d={}, n={n})",
                    u.ncols()
                )));
            }
            let gram = u.transpose() * u;
            let err = (gram - DMatrix::identity(u.ncols(), u.ncols())).amax();
            if err > 1e-10 {
                return Err(Error::Model(format!("basis {k} is not orthonormal (error {err:.2e})")));
            }
        }
        Ok(SubspaceModel { bases, gamma })
    }

    /// `k` random `d`-dimensional subspaces of `R^n` (QR of Gaussian matrices).
    pub fn random(n: usize, d: usize, k: usize, gamma: f64, seed: RngSeed) -> Result<Self> {
        if d == 0 || d >= n {
            return Err(Error::Model(format!("subspace dimension must satisfy 0 < d < n (d={d}, n={n})")));
        }
        let mut rng = seed.rng();
        let bases = (0..k)
            .map(|_| {
                let g = DMatrix::from_vec(n, d, gaussian_vec(&mut rng, n * d, 1.0));
                g.qr().q()
            })
            .collect();
        SubspaceModel::new(bases, gamma)
    }

    pub fn dim(&self) -> usize {
        self.bases[0].nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.bases.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn basis(&self, k: usize) -> &DMatrix<f64> {
        &self.bases[k]
    }

    /// Orthogonal projection of `x` onto subspace `k`.
    pub fn project(&self, k: usize, x: &[f64]) -> Vec<f64> {
        let u = &self.bases[k];
        let xv = nalgebra::DVectorView::from_slice(x, x.len());
        let coef = u.tr_mul(&xv);
        (u * coef).as_slice().to_vec()
    }

    /// Residual vector `x - U_k U_k^T x`.
    pub fn residual(&self, k: usize, x: &[f64]) -> Vec<f64> {
        let p = self.project(k, x);
        x.iter().zip(&p).map(|(a, b)| a - b).collect()
    }

    /// Distance from `x` to subspace `k`.
    pub fn distance(&self, k: usize, x: &[f64]) -> f64 {
        norm(&self.residual(k, x))
    }
}

/// Samples `per_class` points from every subspace of `model`.
///
/// Each point is a unit vector of the subspace plus a perturbation of norm at
/// most `gamma`, rescaled onto the unit ball when it leaves it (rescaling
/// only shrinks the distance to the subspace).
pub fn generate_uos(model: &SubspaceModel, per_class: usize, seed: RngSeed) -> Result<LabeledDataset> {
    if per_class == 0 {
        return arg("per_class must be at least 1");
    }
    let n = model.dim();
    let mut points = Vec::with_capacity(per_class * model.num_classes());
    let mut labels = Vec::with_capacity(points.capacity());
    for k in 0..model.num_classes() {
        let mut rng = seed.derive(k as u64).rng();
        let u = model.basis(k);
        for _ in 0..per_class {
            let z = nalgebra::DVector::from_vec(gaussian_vec(&mut rng, u.ncols(), 1.0));
            let mut x: Vec<f64> = (u * z).as_slice().to_vec();
            let nx = norm(&x);
            x.iter_mut().for_each(|v| *v /= nx);
            if model.gamma() > 0.0 {
                let dir = gaussian_vec(&mut rng, n, 1.0);
                let r = model.gamma() * rng.random::<f64>() / norm(&dir);
                crate::linalg::axpy(r, &dir, &mut x);
                let nx = norm(&x);
                if nx > 1.0 {
                    x.iter_mut().for_each(|v| *v /= nx);
                }
            }
            points.push(x);
            labels.push(k);
        }
    }
    LabeledDataset::new(points, labels, model.num_classes())
}

/// Dictionary from `m` points sampled uniformly without replacement.
pub fn build_dictionary(data: &LabeledDataset, m: usize, seed: RngSeed) -> Result<Dictionary> {
    if m == 0 {
        return arg("dictionary size must be at least 1");
    }
    if m > data.len() {
        return arg(format!("dictionary size {m} exceeds dataset size {}", data.len()));
    }
    let mut rng = seed.rng();
    let idx = sample(&mut rng, data.len(), m).into_vec();
    dictionary_from(data, &idx)
}

/// Like [`build_dictionary`] but with (as nearly as possible) equal counts
/// per class; the remainder goes to the lowest class ids.
pub fn build_dictionary_balanced(data: &LabeledDataset, m: usize, seed: RngSeed) -> Result<Dictionary> {
    if m == 0 {
        return arg("dictionary size must be at least 1");
    }
    let k = data.num_classes();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &l) in data.labels().iter().enumerate() {
        by_class[l].push(i);
    }
    let mut rng = seed.rng();
    let mut idx = Vec::with_capacity(m);
    for (c, members) in by_class.iter().enumerate() {
        let want = m / k + usize::from(c < m % k);
        if want > members.len() {
            return arg(format!("class {c} has {} points, balanced dictionary needs {want}", members.len()));
        }
        idx.extend(sample(&mut rng, members.len(), want).into_iter().map(|j| members[j]));
    }
    idx.shuffle(&mut rng);
    dictionary_from(data, &idx)
}

fn dictionary_from(data: &LabeledDataset, idx: &[usize]) -> Result<Dictionary> {
    let cols: Vec<Vec<f64>> = idx.iter().map(|&i| data.point(i).to_vec()).collect();
    let labels = idx.iter().map(|&i| data.label(i)).collect();
    Dictionary::from_columns(&cols, labels, data.num_classes())
}

/// Loads an IDX image/label pair, resamples to 32x32 and scales each image
/// to unit l2 norm.
pub fn load_idx_images(images: &Path, labels: &Path) -> Result<LabeledDataset> {
    load_idx_images_sized(images, labels, IMAGE_SIDE)
}

pub fn load_idx_images_sized(images: &Path, labels: &Path, side: usize) -> Result<LabeledDataset> {
    let img = idx::read_idx(images, idx::IMAGES_MAGIC)?;
    let lab = idx::read_idx(labels, idx::LABELS_MAGIC)?;
    let (count, rows, cols) = (img.dims[0], img.dims[1], img.dims[2]);
    if lab.dims[0] != count {
        return Err(Error::Parse {
            offset: 4,
            message: format!("image count {count} does not match label count {}", lab.dims[0]),
        });
    }
    let px = rows * cols;
    let mut points = Vec::with_capacity(count);
    for i in 0..count {
        let raw: Vec<f64> = img.data[i * px..(i + 1) * px].iter().map(|&b| b as f64 / 255.0).collect();
        let mut x = idx::resize_bilinear(&raw, rows, cols, side, side);
        let nx = norm(&x);
        if nx == 0.0 {
            return Err(Error::Parse {
                offset: 16 + i * px,
                message: format!("image {i} is blank and cannot be normalized"),
            });
        }
        x.iter_mut().for_each(|v| *v /= nx);
        points.push(x);
    }
    let labels: Vec<usize> = lab.data.iter().map(|&b| b as usize).collect();
    let k = labels.iter().max().map_or(0, |m| m + 1);
    LabeledDataset::new(points, labels, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_planes() -> SubspaceModel {
        let mut a = DMatrix::zeros(4, 2);
        a[(0, 0)] = 1.0;
        a[(1, 1)] = 1.0;
        let mut b = DMatrix::zeros(4, 2);
        b[(2, 0)] = 1.0;
        b[(3, 1)] = 1.0;
        SubspaceModel::new(vec![a, b], 0.0).unwrap()
    }

    #[test]
    fn exact_membership_without_noise() {
        let model = SubspaceModel::random(10, 3, 4, 0.0, RngSeed(3)).unwrap();
        let data = generate_uos(&model, 25, RngSeed(5)).unwrap();
        assert_eq!(data.len(), 100);
        for i in 0..data.len() {
            assert!(model.distance(data.label(i), data.point(i)) < 1e-12);
            assert!((norm(data.point(i)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn noisy_points_stay_within_gamma() {
        let model = SubspaceModel::random(10, 3, 3, 0.05, RngSeed(3)).unwrap();
        let data = generate_uos(&model, 200, RngSeed(9)).unwrap();
        let worst = (0..data.len())
            .map(|i| model.distance(data.label(i), data.point(i)))
            .fold(0.0, f64::max);
        assert!(worst <= 0.05 + 1e-12);
        assert!(worst > 0.0);
        assert!(data.points().iter().all(|p| norm(p) <= 1.0 + 1e-12));
    }

    #[test]
    fn class_span_has_subspace_rank() {
        let model = two_planes();
        let data = generate_uos(&model, 50, RngSeed(1)).unwrap();
        for k in 0..2 {
            let cols: Vec<_> = (0..data.len())
                .filter(|&i| data.label(i) == k)
                .map(|i| nalgebra::DVector::from_column_slice(data.point(i)))
                .collect();
            let m = DMatrix::from_columns(&cols);
            assert_eq!(crate::linalg::rank(&m, 1e-10), 2);
        }
    }

    #[test]
    fn model_validation() {
        assert!(SubspaceModel::random(3, 3, 2, 0.0, RngSeed(0)).is_err());
        let bad = DMatrix::from_element(3, 1, 1.0);
        assert!(SubspaceModel::new(vec![bad], 0.0).is_err());
        assert!(generate_uos(&two_planes(), 0, RngSeed(0)).is_err());
    }

    #[test]
    fn dictionary_sampling() {
        let model = two_planes();
        let data = generate_uos(&model, 10, RngSeed(1)).unwrap();
        let d1 = build_dictionary(&data, 20, RngSeed(4)).unwrap();
        let d2 = build_dictionary(&data, 20, RngSeed(4)).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(d1.len(), 20);
        // every point used exactly once
        let mut seen: Vec<usize> = (0..20)
            .map(|j| (0..20).find(|&i| crate::linalg::dist(data.point(i), d1.column(j)) < 1e-12).unwrap())
            .collect();
        seen.sort();
        assert_eq!(seen, (0..20).collect::<Vec<_>>());
        assert!(build_dictionary(&data, 21, RngSeed(4)).is_err());
        assert!(build_dictionary(&data, 0, RngSeed(4)).is_err());

        let b = build_dictionary_balanced(&data, 7, RngSeed(2)).unwrap();
        assert_eq!(b.labels().iter().filter(|&&l| l == 0).count(), 4);
        assert_eq!(b.labels().iter().filter(|&&l| l == 1).count(), 3);
    }

    #[test]
    fn signed_view_negates() {
        let d = Dictionary::from_columns(&[vec![3.0, 4.0], vec![0.0, 2.0]], vec![0, 1], 2).unwrap();
        assert_eq!(d.column(0), &[0.6, 0.8]);
        for i in 0..2 {
            let p = d.signed_column(i);
            let q = d.signed_column(i + 2);
            assert!(p.iter().zip(&q).all(|(a, b)| *a == -*b));
        }
        assert!(Dictionary::from_columns(&[vec![0.0, 0.0]], vec![0], 1).is_err());
        assert!(Dictionary::from_columns(&[], vec![], 1).is_err());
    }
}
