//! Seed derivation. Every random stream of an experiment is a pure function
//! of the master seed and a stream index:
//!
//! `derive_seed(master, index) = splitmix64(master ^ splitmix64(index))`
//!
//! Runs use `derive_seed(master, run)`; inside a run, the split, feature and
//! training streams use `derive_seed(run_seed, 0 | 1 | 2)`.

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}
