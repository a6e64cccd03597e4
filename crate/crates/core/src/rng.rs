//! Seeded random streams.
//!
//! Every consumer of randomness takes a `(seed, stream)` pair. The generator is
//! ChaCha8, whose 64-bit stream selector gives independent sequences for each
//! replication without sharing state between threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
