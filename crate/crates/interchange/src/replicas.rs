//! Deterministic parallel Monte Carlo replicas.
//!
//! Every replica owns a ChaCha stream seeded from `base_seed ^ replica_index`,
//! so results are a pure function of `(config, seed)` and identical whether
//! the batch runs on one thread or many. Reductions collect into an
//! index-ordered `Vec`, never in completion order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG stream for one replica.
pub fn replica_rng(base_seed: u64, replica_index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(base_seed ^ replica_index)
}

/// Distinct base seed for phase `k` of a multi-phase experiment, spaced so
/// replica indices of different phases can never collide.
pub fn phase_seed(base_seed: u64, phase: u64) -> u64 {
    base_seed.wrapping_add(phase.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Runs `count` independent replicas and returns their results in index
/// order. Parallel under the `parallel` feature, sequential otherwise.
pub fn run_replicas<T, F>(base_seed: u64, count: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut ChaCha8Rng) -> T + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count)
            .into_par_iter()
            .map(|i| {
                let mut rng = replica_rng(base_seed, i);
                f(i, &mut rng)
            })
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_replicas_sequential(base_seed, count, f)
    }
}

/// Always-sequential variant, used by the benches to compare against the
/// parallel path and as the fallback implementation.
pub fn run_replicas_sequential<T, F>(base_seed: u64, count: u64, f: F) -> Vec<T>
where
    F: Fn(u64, &mut ChaCha8Rng) -> T,
{
    (0..count)
        .map(|i| {
            let mut rng = replica_rng(base_seed, i);
            f(i, &mut rng)
        })
        .collect()
}
