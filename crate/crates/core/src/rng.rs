//! Deterministic seeding. Every random draw in the harness comes from a
//! `ChaCha8Rng` whose seed is derived from (master seed, slot, purpose), so
//! results do not depend on evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent sub-stream identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Topology = 1,
    Fading = 2,
    Demand = 3,
    RandomPolicy = 4,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// seed = splitmix(splitmix(splitmix(master) ^ slot) ^ purpose)
pub fn derive_seed(master: u64, slot: u64, stream: Stream) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ slot) ^ stream as u64)
}

pub fn stream_rng(master: u64, slot: u64, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, slot, stream))
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
