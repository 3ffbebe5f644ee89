//! Reproducible random streams.
//!
//! Every random quantity is drawn from a ChaCha8 stream keyed by a 64-bit
//! seed and selected by a 64-bit stream id. ChaCha is counter-based, so a
//! stream can be opened for any index without generating its predecessors;
//! generation therefore gives identical output regardless of how work is
//! split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A seed from which independent substreams and child seeds are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Seed(u64);

impl Seed {
    pub const fn new(seed: u64) -> Self {
        Seed(seed)
    }

    pub fn value(self) -> u64 {
        self.0
    }

    /// Opens substream `index`.
    pub fn stream(self, index: u64) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(index);
        rng
    }

    /// Derives an unrelated seed for a named purpose, e.g. one per trial.
    pub fn child(self, tag: u64) -> Seed {
        Seed(mix64(mix64(self.0) ^ mix64(tag.wrapping_add(0x5851_F42D_4C95_7F2D))))
    }
}

impl From<u64> for Seed {
    fn from(v: u64) -> Self {
        Seed(v)
    }
}

/// Tags for [`Seed::child`], so distinct uses never share a stream.
pub mod tags {
    pub const TRIPLETS: u64 = 1;
    pub const TEST_SET: u64 = 2;
    pub const INIT: u64 = 3;
    pub const MINIBATCH: u64 = 4;
    pub const KMEANS: u64 = 5;
    pub const SPLIT: u64 = 6;
    pub const TRIAL: u64 = 7;
}
