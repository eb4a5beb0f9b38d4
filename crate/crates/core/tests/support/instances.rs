// SPDX-License-Identifier: MIT OR Apache-2.0

//! Seeded small first-stage problems: `n <= 50`, `p <= 3`, `d <= 2`,
//! `lambda` in `{0.01, 0.1, 1}`.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const LAMBDAS: [f64; 3] = [0.01, 0.1, 1.0];

pub struct Instance {
    pub rows: Vec<Vec<f64>>,
    pub d: usize,
    pub lambda: f64,
}

/// Random series whose AR coefficient flips sign halfway through.
pub fn instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = rng.random_range(1..=3);
    let d = rng.random_range(1..=2);
    let n = rng.random_range(8..=50);
    let len = n + d - 1;
    let lambda = LAMBDAS[rng.random_range(0..LAMBDAS.len())];
    let mut rows = vec![vec![0.0; p]; len];
    for t in 0..len {
        let a = if t < len / 2 { 0.6 } else { -0.5 };
        for j in 0..p {
            let prev = if t > 0 { rows[t - 1][j] } else { 0.0 };
            let e: f64 = rng.sample(StandardNormal);
            rows[t][j] = a * prev + e;
        }
    }
    Instance { rows, d, lambda }
}
