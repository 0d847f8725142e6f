//! Seeded random streams.
//!
//! Every random object in the crate is drawn from a [`ChaCha8Rng`] keyed by a 64-bit
//! seed. Child seeds are derived with the SplitMix64 finalizer, so a stream is a pure
//! function of `(parent seed, tag)` and never depends on thread scheduling.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type StreamRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(GOLDEN);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Child seed for `tag` under `seed`: `splitmix64(seed ^ splitmix64(tag))`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag))
}

pub fn stream(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn substream(seed: u64, tag: u64) -> StreamRng {
    stream(derive_seed(seed, tag))
}

/// Complex normal with independent standard normal real and imaginary parts.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

/// Uniform point on the unit sphere of `C^n`, written into `out`.
pub fn fill_unit_sphere<R: Rng + ?Sized>(rng: &mut R, out: &mut [Complex64]) {
    loop {
        let mut norm_sqr = 0.0;
        for c in out.iter_mut() {
            *c = complex_normal(rng);
            norm_sqr += c.norm_sqr();
        }
        if norm_sqr > 0.0 {
            let inv = norm_sqr.sqrt().recip();
            out.iter_mut().for_each(|c| *c *= inv);
            return;
        }
    }
}
