//! Reproducible random streams.
//!
//! Every stochastic routine takes an explicit `seed`. Work that fans out
//! (Monte Carlo batches, bootstrap replicates) derives one ChaCha8 stream per
//! unit of work with [`stream`]: the 64-bit seed selects the key and the
//! unit index selects the ChaCha stream id, so stream `k` is the same no
//! matter which thread draws it or how many threads exist.
//!
//! Stream conventions used in this crate:
//! - `0`: single-shot sampling (`sample_sas`, `simulate_linear_sas`)
//! - `1 + r`: bootstrap replicate `r`
//! - `1 << 32 | b`: Monte Carlo batch `b`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const MC_STREAM_BASE: u64 = 1 << 32;

pub fn stream(seed: u64, stream_id: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}
