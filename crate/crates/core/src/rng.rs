//! Seed plumbing.
//!
//! Every random decision is drawn from a ChaCha stream whose seed is derived
//! from the run seed, a named substream and a list of indices (epoch, example,
//! ...). Results therefore do not depend on evaluation order or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named random substreams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init,
    Shuffle,
    Dropout,
    Augment,
    Subsample,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Init => 0x696e_6974,
            Stream::Shuffle => 0x7368_7566,
            Stream::Dropout => 0x6472_6f70,
            Stream::Augment => 0x6175_676d,
            Stream::Subsample => 0x7375_6273,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a base seed, a substream and indices into one 64-bit seed.
pub fn derive_seed(seed: u64, stream: Stream, indices: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ stream.tag());
    for &i in indices {
        h = splitmix64(h ^ i);
    }
    h
}

pub fn stream_rng(seed: u64, stream: Stream, indices: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream, indices))
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
