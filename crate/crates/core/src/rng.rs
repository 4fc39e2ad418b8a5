//! Counter-based random streams.
//!
//! Every random draw in the crate comes from a [`StreamKey`]: the master seed
//! fixes the ChaCha key, the stream index selects the ChaCha stream. Work split
//! across threads stays reproducible as long as each unit of work is handed a
//! key derived from its index, never from the order in which it runs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub master_seed: u64,
    pub stream_index: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl StreamKey {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    /// Root key of a run.
    pub fn root(master_seed: u64) -> Self {
        Self::new(master_seed, 0)
    }

    /// Child stream labelled by `tag`. Pure function of `(self, tag)`.
    pub fn child(&self, tag: u64) -> Self {
        let mixed = splitmix64(self.stream_index ^ splitmix64(tag.wrapping_add(0xA076_1D64_78BD_642F)));
        Self::new(self.master_seed, mixed)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        let mut state = self.master_seed;
        for chunk in seed.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

impl std::fmt::Display for StreamKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.master_seed, self.stream_index)
    }
}
