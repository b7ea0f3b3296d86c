//! Deterministic random streams.
//!
//! A run derives every source of randomness (weight init, exploration,
//! environment resets, label processes, noise, evaluation) from one master
//! seed plus a named stream id, so adding draws to one consumer never
//! perturbs another.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math::{cos, ln, sqrt};

/// The crate-wide RNG. ChaCha is seedable, portable and has independent
/// streams for one seed.
pub type Stream = ChaCha8Rng;

/// Derive the `stream`-th independent RNG for `master`.
pub fn stream(master: u64, stream: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}

/// One standard normal draw via Box-Muller.
///
/// Two uniforms per draw, transcendentals through `libm`: the sequence is
/// identical on every platform, which a ziggurat table would not guarantee
/// across library versions.
pub fn normal01<R: Rng>(rng: &mut R) -> f64 {
    // gen_range on (0, 1]: avoid ln(0).
    let u1: f64 = 1.0 - rng.gen_range(0.0..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    sqrt(-2.0 * ln(u1)) * cos(2.0 * core::f64::consts::PI * u2)
}

/// Well-known stream ids used by the training harness.
pub mod streams {
    /// Network weight initialization.
    pub const INIT: u64 = 0;
    /// Epsilon-greedy exploration and replay sampling.
    pub const EXPLORE: u64 = 1;
    /// Environment resets during training.
    pub const ENV: u64 = 2;
    /// Interference label process during training.
    pub const LABEL: u64 = 3;
    /// Interference noise generation during training.
    pub const NOISE: u64 = 4;
    /// Everything evaluation-side; offset by evaluation round.
    pub const EVAL_BASE: u64 = 1000;
}
