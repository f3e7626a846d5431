use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random source for work item `stream` of a run seeded with `seed`.
///
/// Every cycle or run draws from its own ChaCha stream, so results depend
/// only on `(seed, stream)` and never on how work is scheduled across threads.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
