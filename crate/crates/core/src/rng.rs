//! Seeded generator streams.
//!
//! Every Monte Carlo loop in the crate draws from `ChaCha8Rng` streams derived
//! from a single master seed, so results depend only on the seed and the
//! (fixed) chunking, never on thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Generator for stream `stream` under `seed`.
pub fn stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws a fresh master seed from `rng`; used to fan one caller-supplied
/// generator out into per-chunk streams.
pub fn fork_seed<R: Rng + ?Sized>(rng: &mut R) -> u64 {
    rng.random()
}

/// Splits `total` trials into `chunks` near-equal parts (first ones larger).
pub(crate) fn chunk_sizes(total: usize, chunks: usize) -> Vec<usize> {
    let chunks = chunks.max(1).min(total.max(1));
    let base = total / chunks;
    let extra = total % chunks;
    (0..chunks).map(|i| base + usize::from(i < extra)).collect()
}

/// Fixed chunk count for parallel Monte Carlo; independent of the thread pool.
pub(crate) const MC_CHUNKS: usize = 16;
