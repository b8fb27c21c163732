#![allow(dead_code)]

use addhaz::dataset::{SurvivalDataset, SurvivalRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Continuous times, about 70% events, `q = 1` and uniform covariates.
pub fn random_dataset(seed: u64, n: usize, p: usize, r: usize) -> SurvivalDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let recs = (0..n)
        .map(|_| SurvivalRecord {
            time: -rng.random::<f64>().ln() + 1e-3,
            status: rng.random::<f64>() < 0.7,
            w: vec![rng.random()],
            x: (0..p).map(|_| rng.random()).collect(),
            z: (0..r).map(|_| rng.random()).collect(),
        })
        .collect();
    SurvivalDataset::new(recs).unwrap()
}

/// Like [`random_dataset`] but `W` takes `levels` values.
pub fn random_discrete_dataset(
    seed: u64,
    n: usize,
    p: usize,
    r: usize,
    levels: usize,
) -> SurvivalDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD15C);
    let recs = (0..n)
        .map(|_| SurvivalRecord {
            time: -rng.random::<f64>().ln() + 1e-3,
            status: rng.random::<f64>() < 0.7,
            w: vec![rng.random_range(0..levels) as f64 / levels as f64],
            x: (0..p).map(|_| rng.random()).collect(),
            z: (0..r).map(|_| rng.random()).collect(),
        })
        .collect();
    SurvivalDataset::new(recs).unwrap()
}

/// Times on the lattice `k / 100`, `k ∈ 1..=300`, so midpoint sums with a
/// step of `1e-4` never straddle a jump.
pub fn lattice_dataset(seed: u64, n: usize, p: usize, r: usize) -> SurvivalDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1A77);
    let recs = (0..n)
        .map(|_| SurvivalRecord {
            time: rng.random_range(1..=300u32) as f64 / 100.0,
            status: rng.random::<f64>() < 0.7,
            w: vec![rng.random()],
            x: (0..p).map(|_| rng.random()).collect(),
            z: (0..r).map(|_| rng.random()).collect(),
        })
        .collect();
    SurvivalDataset::new(recs).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
