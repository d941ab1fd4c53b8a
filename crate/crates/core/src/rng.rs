//! Per-path random streams.
//!
//! Each trajectory owns an independent ChaCha8 stream keyed by the master
//! seed and selected by the path index, so a path's noise depends only on
//! `(master, index)` and never on scheduling or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream family. Distinct purposes draw from disjoint stream ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Noise,
    InitialState,
}

/// `(master seed, path index)` pair identifying a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathSeed {
    pub master: u64,
    pub index: u64,
}

impl PathSeed {
    pub fn new(master: u64, index: u64) -> Self {
        Self { master, index }
    }

    pub fn rng(&self, purpose: Purpose) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        let tag = match purpose {
            Purpose::Noise => 0,
            Purpose::InitialState => 1u64 << 63,
        };
        rng.set_stream(self.index | tag);
        rng
    }
}
