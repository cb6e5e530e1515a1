//! Seeded random streams.
//!
//! Every stochastic routine takes an explicit `u64` seed and derives its own
//! ChaCha8 stream from `(seed, domain tag, index)`. ChaCha is counter based and
//! its output is specified bit for bit, so a run replays identically on every
//! platform. Nothing in the crate touches thread-local or OS randomness.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Domain tags. Two routines handed the same seed never share a stream.
pub mod tag {
    pub const PLACEMENT: u64 = 0x01;
    pub const PAIRING: u64 = 0x02;
    pub const MULTICAST_GROUP: u64 = 0x03;
    pub const DUMBBELL: u64 = 0x04;
    pub const DUMBBELL_FLOWS: u64 = 0x05;
    pub const E2E: u64 = 0x10;
    pub const HOP_BY_HOP: u64 = 0x11;
    pub const CODED_TRIAL: u64 = 0x12;
    pub const SYNTHESIS: u64 = 0x13;
    pub const MOBILITY: u64 = 0x20;
    pub const SWEEP: u64 = 0x30;
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash a master seed together with any number of coordinates.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(mix64(seed), |acc, &p| mix64(acc ^ mix64(p)))
}

pub fn stream(seed: u64, tag: u64, index: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(seed, &[tag, index]))
}

/// Integer-threshold Bernoulli draw. Avoids float comparisons so that the
/// draw sequence is identical everywhere.
#[derive(Clone, Copy, Debug)]
pub struct Bernoulli {
    threshold: u64,
    always: bool,
}

impl Bernoulli {
    /// `prob` is the probability of returning `true`; must lie in `[0, 1]`.
    pub fn new(prob: f64) -> Self {
        debug_assert!((0.0..=1.0).contains(&prob));
        if prob >= 1.0 {
            return Self {
                threshold: u64::MAX,
                always: true,
            };
        }
        // 2^64 as f64 is exact; the cast saturates.
        let threshold = (prob * 18_446_744_073_709_551_616.0) as u64;
        Self {
            threshold,
            always: false,
        }
    }

    #[inline]
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> bool {
        self.always || rng.next_u64() < self.threshold
    }
}
