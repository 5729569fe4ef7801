#![allow(dead_code)]

use dualcert::data::Dictionary;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let g = gaussian(rng, n);
    let nrm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    g.into_iter().map(|v| v / nrm).collect()
}

/// Gaussian dictionary with labels cycling through `k` classes.
pub fn random_dictionary(rng: &mut ChaCha8Rng, n: usize, m: usize, k: usize) -> Dictionary {
    let cols: Vec<Vec<f64>> = (0..m).map(|_| gaussian(rng, n)).collect();
    Dictionary::from_columns(&cols, (0..m).map(|i| i % k).collect(), k).unwrap()
}

pub fn columns(dict: &Dictionary) -> Vec<Vec<f64>> {
    (0..dict.len()).map(|i| dict.column(i).to_vec()).collect()
}
