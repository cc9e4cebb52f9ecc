//! Deterministic derivation of per-module and per-sample seeds from one
//! global seed.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the module named `tag`.
pub fn derive(global: u64, tag: &str) -> u64 {
    tag.bytes().fold(splitmix(global), |h, b| splitmix(h ^ b as u64))
}

/// Seed for item `path` (e.g. `[epoch, sample]`) under `base`.
pub fn derive_indexed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix(base), |h, &i| splitmix(h ^ i))
}
