//! Random draws used by the model.
//!
//! The simulation generator is ChaCha8 seeded through `seed_from_u64`. The
//! stream is fixed for a given seed, so every run is replayable. Variates are
//! produced with textbook methods so the draw count per variate is constant:
//! Poisson by sequential-search inversion (one uniform), Normal by the
//! Box-Muller transform (two uniforms, the sine branch is discarded).

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generator driving a single simulation run.
pub type SimRng = ChaCha8Rng;

pub fn sim_rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform in [0, 1).
#[inline]
pub fn uniform<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}

/// Uniform in (0, 1], safe to take the log of.
#[inline]
fn uniform_open_zero<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Poisson(lambda) by inversion: walk the CDF until it passes one uniform.
pub fn poisson<R: RngCore + ?Sized>(rng: &mut R, lambda: f64) -> u32 {
    let u = uniform(rng);
    if lambda <= 0.0 {
        return 0;
    }
    let mut p = libm::exp(-lambda);
    let mut cdf = p;
    let mut k = 0u32;
    // The tail mass below f64 resolution stops the walk.
    while u >= cdf && p > 0.0 {
        k += 1;
        p *= lambda / f64::from(k);
        cdf += p;
    }
    k
}

/// Standard normal via Box-Muller (cosine branch).
pub fn standard_normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    let u1 = uniform_open_zero(rng);
    let u2 = uniform(rng);
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
}

/// Index in `0..n`.
#[inline]
pub fn index<R: RngCore + ?Sized>(rng: &mut R, n: u32) -> u32 {
    rng.random_range(0..n)
}
