//! Synthetic workloads shared by the benchmarks.

use autosmote::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Overlapping uniform blobs, one per class, with the given class sizes.
pub fn blobs(counts: &[usize], n_features: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (c, &n) in counts.iter().enumerate() {
        for _ in 0..n {
            rows.push((0..n_features).map(|_| rng.random::<f64>() * 0.6 + 0.2 * c as f64).collect::<Vec<_>>());
            labels.push(c);
        }
    }
    Dataset::from_rows(&rows, labels, counts.len()).expect("blob rows are well formed")
}

/// A Diabetes-sized binary workload: 500 majority and 268 minority rows.
pub fn binary_workload() -> Dataset {
    blobs(&[500, 268], 8, 7)
}
