//! Keyed random substreams.
//!
//! Every random draw in the crate comes from a generator keyed by
//! `(master_seed, tag, index)`, so results do not depend on how work is
//! scheduled across threads, and adding a component never shifts the draws of
//! another one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Generator for component `tag`, replication `index`, under `master_seed`.
pub fn substream(master_seed: u64, tag: &str, index: u64) -> Stream {
    let mut state = splitmix64(master_seed) ^ splitmix64(fnv1a(tag)).rotate_left(17) ^ splitmix64(index ^ 0x5851_f42d_4c95_7f2d);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}
