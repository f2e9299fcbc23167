//! Seeding scheme for reproducible, thread-count independent randomness.
//!
//! A single 64-bit master seed is split into independent streams by mixing
//! it with a stream tag and up to three integer coordinates (for example
//! epoch, batch and token id) through SplitMix64. Each stream drives its own
//! ChaCha8 generator, so no generator state ever has to be shared between
//! workers or saved in a checkpoint: the coordinates are enough to rebuild it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream tags. Distinct tags never collide for the same coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Shuffle = 2,
    Latent = 3,
    Particle = 4,
    ParticleShapes = 5,
    LatentInit = 6,
    Query = 7,
    Sample = 8,
    Synthetic = 9,
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the seed of a sub-stream.
pub fn derive_seed(master: u64, stream: Stream, coords: [u64; 3]) -> u64 {
    let mut h = splitmix64(master ^ splitmix64(stream as u64));
    for c in coords {
        h = splitmix64(h ^ c.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    }
    h
}

pub fn stream_rng(master: u64, stream: Stream, coords: [u64; 3]) -> Rng {
    Rng::seed_from_u64(derive_seed(master, stream, coords))
}

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
