//! Counter-derived random streams.
//!
//! Every draw owns a ChaCha stream addressed by `(seed, index)`, so results
//! do not depend on how work is split across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// RNG for draw `index` under `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Independent sub-seed for a labelled component of a run.
pub fn derive_seed(master: u64, tag: &str, a: u64, b: u64) -> u64 {
    let tag_hash = tag
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, c| (h ^ c as u64).wrapping_mul(0x0100_0000_01b3));
    let mut rng = ChaCha8Rng::seed_from_u64(master ^ tag_hash);
    rng.set_stream(a);
    rng.set_word_pos(b as u128 * 16);
    rng.next_u64()
}
