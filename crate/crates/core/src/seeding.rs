//! Deterministic derivation of per-task RNG seeds from a master seed.
//!
//! Monte Carlo trials, graph generation, and training-set draws each own an
//! independent stream derived from `(master, stream, index)`, so results are
//! reproducible regardless of execution order or thread count.

/// SplitMix64 finalizer; statistically well-mixed for seed derivation.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed and two stream indices.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index)
}
