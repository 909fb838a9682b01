use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seeded generator for a top-level consumer.
pub(crate) fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent generator for sub-task `stream` under `seed`.
///
/// ChaCha streams give non-overlapping sequences, so per-path or per-epoch
/// generators never depend on evaluation order.
pub(crate) fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
