//! Reproducible random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by a
//! master seed and selected by a purpose tag (and optionally an index). The
//! key derivation and the integer sampling helpers below are fixed, so the
//! streams are identical on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Purpose tags. Two operations that must see the same draws share a tag.
pub mod tag {
    pub const PERMUTATIONS: &str = "permutations";
    pub const MATCHING: &str = "matching";
    pub const CONFIGURATION: &str = "configuration";
    pub const PERM_ESTIMATE: &str = "perm-estimate";
    pub const DEGREES: &str = "degrees";
    pub const ENDPOINTS: &str = "endpoints";
    pub const EXPOSURES: &str = "exposures";
    pub const SEEDS: &str = "seeds";
    pub const ER: &str = "erdos-renyi";
    pub const TRIAL: &str = "trial";
    pub const JITTER: &str = "jitter";
    pub const PARETO: &str = "pareto";
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `(seed, index)`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

/// Generator for `(master_seed, purpose)`.
pub fn stream(seed: u64, purpose: &str) -> StreamRng {
    indexed_stream(seed, purpose, 0)
}

/// Generator for `(master_seed, purpose, index)`, e.g. one per node or trial.
pub fn indexed_stream(seed: u64, purpose: &str, index: u64) -> StreamRng {
    let mut key = [0u8; 32];
    let a = splitmix64(seed);
    let b = fnv1a(purpose.as_bytes());
    let c = splitmix64(index ^ 0xd1b5_4a32_d192_ed03);
    let d = splitmix64(a ^ b.rotate_left(17) ^ c.rotate_left(41));
    key[..8].copy_from_slice(&a.to_le_bytes());
    key[8..16].copy_from_slice(&b.to_le_bytes());
    key[16..24].copy_from_slice(&c.to_le_bytes());
    key[24..].copy_from_slice(&d.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Uniform index in `0..len`, sampled through `u64` so 32- and 64-bit
/// targets consume identical streams.
#[inline]
pub fn uniform_index<R: Rng + ?Sized>(rng: &mut R, len: usize) -> usize {
    debug_assert!(len > 0);
    rng.gen_range(0..len as u64) as usize
}

/// Uniform draw in `(0, 1]`.
#[inline]
pub fn open_closed01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.gen::<f64>()
}

/// Fisher-Yates shuffle built on [`uniform_index`].
pub fn shuffle<T, R: Rng + ?Sized>(rng: &mut R, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = uniform_index(rng, i + 1);
        items.swap(i, j);
    }
}

/// Uniform random permutation of `0..len`.
pub fn permutation<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..len).collect();
    shuffle(rng, &mut p);
    p
}
