//! Index-addressed random substreams.
//!
//! Every consumer of randomness derives its own ChaCha8 stream from the run
//! seed and a path of indices, so results do not depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const STREAM_FIT_STARTS: u64 = 1;
pub(crate) const STREAM_BOOTSTRAP: u64 = 2;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A generator for `seed` and the substream identified by `path`.
pub fn substream(seed: u64, path: &[u64]) -> ChaCha8Rng {
    let stream = path
        .iter()
        .fold(0x5bd1_e995_u64, |acc, &i| splitmix64(acc ^ splitmix64(i)));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
