//! Named, independent random streams derived from one master seed.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Identifier of a random stream under a [`SeedTree`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamId(pub u64);

impl StreamId {
    pub const GRADIENT: StreamId = StreamId(1);
    pub const COST: StreamId = StreamId(2);
    pub const PARTICLE_FILTER: StreamId = StreamId(3);
    pub const DATA: StreamId = StreamId(4);
    pub const INIT: StreamId = StreamId(5);
    pub const MONTE_CARLO: StreamId = StreamId(6);
    const CHILD: StreamId = StreamId(0x5eed_c41d);
}

/// A master seed from which named streams and child seeds are spawned.
///
/// Each stream is a ChaCha8 generator keyed by the master seed with the
/// stream id selecting the ChaCha stream, so streams never overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    seed: u64,
}

impl SeedTree {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self, id: StreamId) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(id.0);
        rng
    }

    /// Seed tree for replicate `index`, e.g. one Monte Carlo run.
    pub fn child(&self, index: u64) -> SeedTree {
        let mut rng = self.stream(StreamId::CHILD);
        rng.set_word_pos(u128::from(index) * 2);
        SeedTree::new(rng.next_u64())
    }
}
