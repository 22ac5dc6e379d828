//! Seeded randomness. Every random draw in the crate goes through a generator
//! that was created from an explicit seed; there is no global RNG.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::numkit::{Matrix, Vector};

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream from a parent seed and a label.
pub fn substream(seed: u64, label: u64) -> Rng {
    seeded(splitmix64(seed ^ splitmix64(label)))
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based uniform draw in [-1, 1), independent of any generator state.
pub fn counter_uniform(key: u64, counter: u64) -> f64 {
    let bits = splitmix64(key.wrapping_mul(0x2545_F491_4F6C_DD1D) ^ counter) >> 11;
    (bits as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
}

pub fn uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

pub fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn normal_vector(rng: &mut Rng, n: usize) -> Vector {
    Vector::from((0..n).map(|_| normal(rng)).collect::<Vec<_>>())
}

pub fn uniform_vector(rng: &mut Rng, n: usize, lo: f64, hi: f64) -> Vector {
    Vector::from((0..n).map(|_| uniform(rng, lo, hi)).collect::<Vec<_>>())
}

pub fn normal_matrix(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| normal(rng)).collect();
    Matrix::from_vec(rows, cols, data).expect("shape is consistent by construction")
}

/// Entries i.i.d. uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
pub fn fan_in_matrix(rng: &mut Rng, rows: usize, cols: usize, fan_in: usize) -> Matrix {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let data = (0..rows * cols).map(|_| uniform(rng, -bound, bound)).collect();
    Matrix::from_vec(rows, cols, data).expect("shape is consistent by construction")
}

pub fn fan_in_vector(rng: &mut Rng, n: usize, fan_in: usize) -> Vector {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    uniform_vector(rng, n, -bound, bound)
}

pub fn shuffle<T>(rng: &mut Rng, items: &mut [T]) {
    use rand::seq::SliceRandom;
    items.shuffle(rng);
}
