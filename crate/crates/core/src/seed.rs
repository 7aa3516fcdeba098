//! Derivation of per-consumer seeds from the single master seed.
//!
//! Every random consumer (fold shuffling, network initialisation per fold,
//! random-forest trees, synthetic slides) gets its own stream:
//! `derive_seed(master, role)` hashes the master seed together with a stable
//! role tag such as `"folds"`, `"fold-3"` or `"synth/mal_007"`. The hash is
//! FNV-1a over the little-endian seed bytes followed by the tag bytes, passed
//! through the SplitMix64 finaliser. It does not depend on the platform or on
//! the Rust version, so the derived streams are stable across builds.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn derive_seed(master: u64, role: &str) -> u64 {
    let mut h = FNV_OFFSET;
    for byte in master.to_le_bytes().iter().chain(role.as_bytes()) {
        h ^= u64::from(*byte);
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix64(h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
