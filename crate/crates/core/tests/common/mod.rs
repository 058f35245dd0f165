#![allow(dead_code)]

use ctcor::GeometrySpec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// 64×64 grid at 1 mm, magnification 2, 100 detector pixels of 1.6 mm.
pub fn desk(n_angles: usize) -> GeometrySpec {
    GeometrySpec::full_rotation(250.0, 250.0, 100, 1.6, n_angles, 64, 1.0)
}

/// Small grid whose fan still covers the whole image.
pub fn small(size: usize, n_angles: usize) -> GeometrySpec {
    let n_det = 3 * size + 3;
    GeometrySpec::full_rotation(40.0, 40.0, n_det, 1.0, n_angles, size, 1.0)
}

pub fn gaussian(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(b).max(f64::MIN_POSITIVE)
}
