//! Synthetic inputs shared by the benchmarks.

use chartensor::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `rows × n_vars` dataset on the unit cube with a mild two-cluster structure.
pub fn clustered(rows: usize, n_vars: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(rows * n_vars);
    for _ in 0..rows {
        let center = if rng.random::<bool>() { 0.3 } else { 0.7 };
        for _ in 0..n_vars {
            let jitter: f64 = rng.random_range(-0.15..0.15);
            values.push((center + jitter).clamp(0.0, 1.0));
        }
    }
    Dataset::new(n_vars, values).expect("finite values")
}
