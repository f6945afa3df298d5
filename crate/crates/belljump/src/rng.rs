//! Deterministic random streams.
//!
//! Every trajectory draws from its own ChaCha12 stream selected by
//! `(seed, trajectory_index)`, so an ensemble is reproducible draw-for-draw
//! no matter how indices are distributed over worker threads. All variate
//! transformations are written out explicitly (53-bit uniform, inverse-CDF
//! exponential, Box-Muller normal) so the byte-level output of a run is pinned
//! by this crate alone and cannot drift with a distribution library.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

/// Stream for one trajectory. Distinct indices give statistically independent
/// ChaCha streams under the same seed.
#[must_use]
pub fn trajectory_rng(seed: u64, trajectory_index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(trajectory_index);
    rng
}

/// Uniform on [0, 1) with 53 random bits.
pub fn uniform_f64(rng: &mut impl RngCore) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    (rng.next_u64() >> 11) as f64 * SCALE
}

/// Unit-rate exponential by inverse transform. `1 - u` lies in (0, 1], so the
/// logarithm is always finite.
pub fn exp1(rng: &mut impl RngCore) -> f64 {
    -(1.0 - uniform_f64(rng)).ln()
}

/// Standard normal pair by Box-Muller. The radius draw rejects u = 0.
pub fn normal_pair(rng: &mut impl RngCore) -> (f64, f64) {
    let mut u = uniform_f64(rng);
    while u == 0.0 {
        u = uniform_f64(rng);
    }
    let v = uniform_f64(rng);
    let r = (-2.0 * u.ln()).sqrt();
    let theta = 2.0 * std::f64::consts::PI * v;
    (r * theta.cos(), r * theta.sin())
}
