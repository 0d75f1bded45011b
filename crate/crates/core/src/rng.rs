//! Reproducible random streams.
//!
//! A stream is a `(seed, stream_id)` pair backed by ChaCha8, whose 64-bit
//! stream parameter gives independent sequences for the same key. Work that
//! fans out derives child streams with [`RngStream::split`], so a replicate's
//! draws depend only on its position in the work tree, never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seed used when the caller does not pass one.
pub const DEFAULT_SEED: u64 = 20_211_227;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn from_seed(seed: u64) -> Self {
        Self::new(seed, 0)
    }

    /// Child stream number `index`. Same parent and index give the same child.
    pub fn split(&self, index: u64) -> Self {
        let a = splitmix64(self.stream_id ^ 0xA076_1D64_78BD_642F);
        let b = splitmix64(a ^ index.wrapping_mul(0xE703_7ED1_A0B4_28DB));
        Self::new(self.seed, b)
    }

    pub fn generator(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
