use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent generator for stream `stream` under `seed`.
///
/// Each market index gets its own stream, so per-market draws do not depend
/// on the order in which markets are visited.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Streams reserved for draws that are not tied to a single market.
pub(crate) const SHARED_STREAM_BASE: u64 = 1 << 40;
