//! Splittable counter-based random streams.
//!
//! Every stochastic component derives its own stream from
//! `(master seed, stream tag, indices...)`, so results are reproducible
//! regardless of thread count or scheduling order. Derivation hashes the
//! key tuple into a ChaCha8 seed; streams with distinct keys are
//! statistically independent.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags, one per independent consumer of randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamTag {
    Field,
    Chain,
    Coupling,
    SequentialSampler,
    Localization,
    Classify,
    Sampler,
    Probe,
    TestFunction,
}

impl StreamTag {
    fn code(self) -> u64 {
        match self {
            StreamTag::Field => 1,
            StreamTag::Chain => 2,
            StreamTag::Coupling => 3,
            StreamTag::SequentialSampler => 4,
            StreamTag::Localization => 5,
            StreamTag::Classify => 6,
            StreamTag::Sampler => 7,
            StreamTag::Probe => 8,
            StreamTag::TestFunction => 9,
        }
    }
}

// SplitMix64 finalizer; full-period bijection on u64.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent stream from a master seed, a tag and up to three
/// structural indices (replica, vertex id, event index, ...).
pub fn stream(master: u64, tag: StreamTag, a: u64, b: u64, c: u64) -> ChaCha8Rng {
    let mut state = mix(master ^ 0x517c_c1b7_2722_0a95);
    state = mix(state ^ tag.code());
    state = mix(state ^ a);
    state = mix(state ^ b);
    state = mix(state ^ c);
    let mut seed = [0u8; 32];
    let mut word = state;
    for chunk in seed.chunks_exact_mut(8) {
        word = mix(word);
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Shorthand for a per-replica stream.
pub fn replica_stream(master: u64, tag: StreamTag, replica: u64) -> ChaCha8Rng {
    stream(master, tag, replica, 0, 0)
}

/// Derive a child seed (for nested components that take their own
/// master seed, e.g. per-replica field specs).
pub fn derive_seed(master: u64, tag: StreamTag, a: u64, b: u64) -> u64 {
    let mut s = mix(master ^ 0x6c62_272e_07bb_0142);
    s = mix(s ^ tag.code());
    s = mix(s ^ a);
    mix(s ^ b)
}

/// Counter-based uniform in [0, 1): one hash per (key, indices) tuple,
/// usable as a lazily evaluated i.i.d. field without storing draws.
pub fn uniform_hash(seed: u64, tag: StreamTag, a: u64, b: u64, c: u64) -> f64 {
    let mut s = mix(seed ^ 0x2545_f491_4f6c_dd1d);
    s = mix(s ^ tag.code());
    s = mix(s ^ a);
    s = mix(s ^ b);
    s = mix(s ^ c);
    (s >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
