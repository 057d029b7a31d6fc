use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// An independent generator for sub-task `stream` of a seeded job.
///
/// Streams of one seed never overlap, so per-column or per-ensemble work can
/// run in any order and still reproduce bit for bit.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A child seed for sub-job `tag`, for APIs that take a plain seed.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    stream_rng(seed, tag).next_u64()
}
