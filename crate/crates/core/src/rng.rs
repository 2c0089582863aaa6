//! Seeded random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream derived from the
//! episode seed, so e.g. a noisier critic never changes the faults drawn by
//! the world.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    World = 0,
    Perception = 1,
    Critic = 2,
    Actor = 3,
}

pub fn stream(seed: u64, which: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one episode within a lineage.
pub fn episode_seed(lineage_seed: u64, episode_index: u32) -> u64 {
    mix(lineage_seed ^ mix(u64::from(episode_index) + 1))
}

/// Seed derived from `seed` and a text key such as a block or field id.
pub fn keyed_seed(seed: u64, key: &str) -> u64 {
    let h = key
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325_u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3));
    mix(seed ^ mix(h))
}
