//! Stable per-trial seed derivation.
//!
//! ```text
//! fnv1a64(bytes)  = fold h ← (h ⊕ b)·0x100000001b3 from h = 0xcbf29ce484222325
//! splitmix64(x)   = z ← x + 0x9e3779b97f4a7c15
//!                   z ← (z ⊕ z≫30)·0xbf58476d1ce4e5b9
//!                   z ← (z ⊕ z≫27)·0x94d049bb133111eb
//!                   z ⊕ z≫31                       (all arithmetic mod 2⁶⁴)
//! seed            = base ⊕ splitmix64(fnv1a64(name) ⊕ splitmix64(snr_index≪32 | trial_index))
//! ```
//!
//! `name` is the algorithm's scenario name (`ss_esprit`, ...) as UTF-8 and
//! `trial_index` is taken modulo 2³².

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn trial_seed(base: u64, algorithm: &str, snr_index: usize, trial_index: usize) -> u64 {
    let position = ((snr_index as u64) << 32) | (trial_index as u64 & 0xffff_ffff);
    base ^ splitmix64(fnv1a64(algorithm.as_bytes()) ^ splitmix64(position))
}
