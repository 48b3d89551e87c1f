//! Counter-based seed derivation.
//!
//! Every random component of a trial draws from its own ChaCha8 stream keyed
//! by `(master seed, component tag, index)`. Streams depend only on these
//! keys, never on scheduling order, so results are identical at any thread
//! count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A value-type handle for an independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamSeed(pub u64);

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const fn fnv1a(tag: &str) -> u64 {
    let bytes = tag.as_bytes();
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    let mut i = 0;
    while i < bytes.len() {
        hash ^= bytes[i] as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
        i += 1;
    }
    hash
}

impl StreamSeed {
    pub fn new(seed: u64) -> Self {
        StreamSeed(seed)
    }

    /// Child stream for a named component and index.
    pub fn derive(self, tag: &str, index: u64) -> StreamSeed {
        let h = splitmix64(self.0 ^ splitmix64(fnv1a(tag)));
        StreamSeed(splitmix64(h ^ splitmix64(index.wrapping_add(0x632B_E59B_D9B4_E019))))
    }

    /// Trial sub-seed for grid point `sweep_index`, trial `trial`.
    pub fn trial(self, sweep_index: u64, trial: u64) -> StreamSeed {
        self.derive("sweep", sweep_index).derive("trial", trial)
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

impl From<u64> for StreamSeed {
    fn from(seed: u64) -> Self {
        StreamSeed(seed)
    }
}
