//! Stable seed derivation. Every random stream in the crate is keyed from a
//! root seed through these functions so results never depend on call order,
//! thread scheduling, or the standard library's hasher.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a root and a path of keys.
pub fn derive(root: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(root), |h, &k| mix64(h.rotate_left(23) ^ mix64(k)))
}

/// FNV-1a over the bytes of a label, for keying seeds by name.
pub fn label(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Uniform in `[0, 1)` from a 64-bit hash.
#[inline]
pub fn unit(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
