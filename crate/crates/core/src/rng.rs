//! Deterministic random-stream derivation.
//!
//! Every random draw in a tracking step comes from a stream keyed by
//! `(seed, time step, label, purpose)`, so results do not depend on the
//! order in which potential objects are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `words` into `seed` with SplitMix64.
pub fn mix(seed: u64, words: &[u64]) -> u64 {
    words
        .iter()
        .fold(splitmix64(seed), |h, &w| splitmix64(h ^ w))
}

/// Seed of Monte-Carlo run `run` derived from a base seed:
/// `splitmix64(splitmix64(base) ^ run)`.
pub fn derive_run_seed(base: u64, run: u64) -> u64 {
    mix(base, &[run])
}

/// What a stream is used for; part of the stream key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Predict = 1,
    Birth = 2,
    Resample = 3,
    Simulate = 4,
}

pub fn stream(seed: u64, step: u32, label: (u32, u32), purpose: Purpose) -> StreamRng {
    let key = mix(
        seed,
        &[step as u64, label.0 as u64, label.1 as u64, purpose as u64],
    );
    ChaCha8Rng::seed_from_u64(key)
}
