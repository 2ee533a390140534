//! Deterministic random streams.
//!
//! Every Monte-Carlo unit of work (a Gaussian draw, a simulated replicate)
//! gets its own ChaCha stream addressed by a 64-bit key and a 64-bit stream
//! index, so results never depend on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Stream number `index` under `key`.
pub fn stream(key: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}

/// Mixes a master seed with a textual tag into a new key.
pub fn derive_key(master: u64, tag: &str) -> u64 {
    // FNV-1a over the tag, then a SplitMix64 finaliser over the combination.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix(master ^ splitmix(h))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
