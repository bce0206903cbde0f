//! Counter-based random substreams.
//!
//! Every random draw in a run is taken from a stream keyed by
//! `(master_seed, iteration, node, purpose)`. Streams are independent of the
//! order in which workers visit iterations, so results do not depend on the
//! worker count, and two runs that share a seed see common random numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator handed to every stochastic operation.
pub type RandomStream = ChaCha8Rng;

/// Node index used for draws that belong to the iteration as a whole.
pub const ITERATION_SCOPE: u64 = u64::MAX;

/// What a substream is used for. Distinct purposes never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Mobility,
    InitialEnergy,
    Harvest,
    Packet,
    Ranging,
    AnchorError,
    Bearing,
    Rss,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Mobility => 1,
            Purpose::InitialEnergy => 2,
            Purpose::Harvest => 3,
            Purpose::Packet => 4,
            Purpose::Ranging => 5,
            Purpose::AnchorError => 6,
            Purpose::Bearing => 7,
            Purpose::Rss => 8,
        }
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a counter.
pub fn derive_seed(parent: u64, counter: u64) -> u64 {
    mix64(mix64(parent) ^ counter.rotate_left(17))
}

/// Opens the substream for one `(iteration, node, purpose)` triple.
pub fn substream(master_seed: u64, iteration: u64, node: u64, purpose: Purpose) -> RandomStream {
    let mut seed = [0u8; 32];
    let words = [
        mix64(master_seed),
        mix64(iteration ^ 0xA076_1D64_78BD_642F),
        mix64(node ^ 0xE703_7ED1_A0B4_28DB),
        mix64(purpose.tag() ^ 0x8EBC_6AF0_9C88_C6E3),
    ];
    for (chunk, w) in seed.chunks_exact_mut(8).zip(words) {
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}
