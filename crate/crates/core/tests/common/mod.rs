#![allow(dead_code)]

pub mod fixtures;
pub mod oracle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Non-negative integer vote vectors with plenty of ties.
pub fn vote_pair(rng: &mut ChaCha8Rng, min_len: usize, max_len: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rng.random_range(min_len..=max_len);
    let top = rng.random_range(1..=6);
    let draw = |rng: &mut ChaCha8Rng| {
        (0..n)
            .map(|_| rng.random_range(0..=top) as f64)
            .collect::<Vec<_>>()
    };
    let x = draw(rng);
    let y = draw(rng);
    (x, y)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
