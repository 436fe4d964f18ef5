//! Counter-based random substreams: one ChaCha stream per cycle, so a cycle's
//! draws depend only on `(seed, cycle index)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Word offset between consecutive path blocks of a gridded cycle.
const BLOCK_SHIFT: u32 = 40;
/// Word offset of the auxiliary uniforms used for crossing decisions.
const AUX_OFFSET: u128 = 1 << 67;

pub(crate) fn cycle_rng(seed: u64, cycle: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(cycle);
    rng
}

/// Positions `rng` at the start of path block `block`; the draws of a block
/// do not depend on how many draws earlier blocks consumed.
pub(crate) fn seek_block(rng: &mut ChaCha8Rng, block: u64) {
    rng.set_word_pos((block as u128) << BLOCK_SHIFT);
}

pub(crate) fn aux_rng(seed: u64, cycle: u64) -> ChaCha8Rng {
    let mut rng = cycle_rng(seed, cycle);
    rng.set_word_pos(AUX_OFFSET);
    rng
}
