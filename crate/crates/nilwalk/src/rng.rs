//! Reproducible parallel random streams.
//!
//! Every Monte Carlo routine shards its sample range into fixed-size blocks
//! and draws block `i` from an independent ChaCha stream keyed by
//! `(master seed, i)`. The shard partition depends only on the sample count,
//! so results are bitwise identical for any number of worker threads.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Samples per shard; small enough to parallelize, large enough to amortize
/// stream setup.
pub const SHARD_SIZE: u64 = 1 << 13;

/// Independent stream for one shard of a Monte Carlo run.
pub fn shard_rng(master_seed: u64, shard: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(shard);
    rng
}

/// Shard index ranges `(start, len)` covering `samples` draws.
pub fn shards(samples: u64) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < samples {
        let len = SHARD_SIZE.min(samples - start);
        out.push((start, len));
        start += len;
    }
    out
}
