//! Keyed random substreams.
//!
//! Every random quantity is drawn from a ChaCha8 generator whose seed is a
//! pure function of `(master_seed, key words)`. Replica `i` of a run uses the
//! key `(REPLICA, i)`; Poisson marks of the event field use
//! `(RECOVERY | ARROW, site, direction, time block)`. Nothing depends on the
//! order in which substreams are requested.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub const TAG_REPLICA: u64 = 0x7265_706c;
pub const TAG_RECOVERY: u64 = 0x7265_636f;
pub const TAG_ARROW: u64 = 0x6172_726f;
pub const TAG_JUMP: u64 = 0x6a75_6d70;
pub const TAG_FIELD: u64 = 0x6669_656c;
pub const TAG_START: u64 = 0x7374_6172;
pub const TAG_BOOTSTRAP: u64 = 0x626f_6f74;
pub const TAG_FLEMING_VIOT: u64 = 0x666c_656d;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes a master seed and a key path into a 64-bit substream seed.
#[inline]
pub fn derive_seed(master: u64, words: &[u64]) -> u64 {
    let mut h = mix64(master ^ 0x6a09_e667_f3bc_c908);
    for &w in words {
        h = mix64(h ^ mix64(w));
    }
    h
}

#[inline]
pub fn stream(master: u64, words: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, words))
}

/// Seed of replica `i` under `master`.
#[inline]
pub fn replica_seed(master: u64, i: u64) -> u64 {
    derive_seed(master, &[TAG_REPLICA, i])
}

/// Exponential variate with the given rate, drawn by inversion.
#[inline]
pub fn exponential<R: rand::Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    // 1 - U lies in (0, 1], so the log is finite.
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}
