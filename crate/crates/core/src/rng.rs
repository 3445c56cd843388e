//! Seedable, platform-independent random streams.
//!
//! Every replication owns an [`RngState`] derived from the master seed, the
//! cell index and the replication index. Derivation is a pure function of
//! those three numbers, so results do not depend on which thread ran which
//! replication.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Generator handed to every sampler.
pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub stream: u64,
}

impl RngState {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Stream for replication `rep` of cell `cell` under `master`.
    pub fn derive(master: u64, cell: u64, rep: u64) -> Self {
        Self { seed: master, stream: derive_stream(master, cell, rep) }
    }

    pub fn rng(&self) -> SimRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// SplitMix64 finalizer. A bijection on `u64`.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Root value identifying one cell; reported in output tables.
pub fn cell_seed(master: u64, cell: u64) -> u64 {
    mix64(mix64(master) ^ mix64(cell.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

/// For fixed `(master, cell)` this is injective in `rep`, since `mix64` is a
/// bijection and xor with a constant is too.
pub fn derive_stream(master: u64, cell: u64, rep: u64) -> u64 {
    mix64(cell_seed(master, cell) ^ rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use std::collections::HashSet;

    #[test]
    fn same_state_same_sequence() {
        let a: Vec<u64> = {
            let mut r = RngState::new(7, 3).rng();
            (0..16).map(|_| r.random()).collect()
        };
        let b: Vec<u64> = {
            let mut r = RngState::new(7, 3).rng();
            (0..16).map(|_| r.random()).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn streams_differ() {
        let mut a = RngState::new(7, 3).rng();
        let mut b = RngState::new(7, 4).rng();
        let x: u64 = a.random();
        let y: u64 = b.random();
        assert_ne!(x, y);
    }

    #[test]
    fn derived_streams_pairwise_distinct() {
        let set: HashSet<u64> = (0..100_000).map(|r| derive_stream(42, 5, r)).collect();
        assert_eq!(set.len(), 100_000);
        assert_ne!(derive_stream(42, 0, 0), derive_stream(42, 1, 0));
    }

    #[test]
    fn frozen_first_draw() {
        // Guards against silent changes to the derivation or generator.
        // Stream value recomputed independently from the SplitMix64 constants.
        assert_eq!(derive_stream(1, 2, 3), 9_325_333_840_170_682_399);
        let mut r = RngState::derive(1, 2, 3).rng();
        assert_eq!(r.random::<u64>(), 18_305_466_231_412_199_113);
    }
}
