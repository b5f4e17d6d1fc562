//! Seed derivation. Everything random in a run descends from one u64
//! through the SplitMix64 finalizer, so any run of a sweep can be repeated
//! on its own from the seed recorded in the dataset.

const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// One SplitMix64 step: add the golden gamma, then finalize.
pub fn mix(x: u64) -> u64 {
    let mut z = x.wrapping_add(GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of repetition `rep` of configuration `(n, p)` under `master`:
/// `mix(mix(mix(master ^ n) ^ bits(p)) ^ rep)`.
pub fn run_seed(master: u64, n: usize, drop_prob: f64, rep: usize) -> u64 {
    let s = mix(master ^ n as u64);
    let s = mix(s ^ drop_prob.to_bits());
    mix(s ^ rep as u64)
}
