//! Deterministic seed splitting.
//!
//! Every random stream in a sweep is seeded from the root seed and a short
//! list of integer tags (trial index, UE index, purpose, ...). Tags are folded
//! in order through the SplitMix64 finalizer, so the derived seed depends only
//! on the root seed and the tag path, never on scheduling.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `derive(root, [a, b, c]) = mix(mix(mix(root, a), b), c)` with
/// `mix(s, t) = splitmix64(s ^ splitmix64(t))`.
pub fn derive(root: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(root), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}
