//! Seeded, splittable random streams.
//!
//! Every random draw in the crate comes from a [`RngStream`]: a root seed plus
//! a 64-bit stream id that selects one of ChaCha8's independent streams. Child
//! streams are derived with [`RngStream::child`], which mixes the parent id and
//! a tag through SplitMix64. A replication `r` of scenario `s` therefore always
//! sees the same numbers no matter which worker thread picks it up.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Stream for sub-task `tag` (a replication index, a chain index, a role).
    /// Derivation is `splitmix64(stream_id ^ splitmix64(tag + 1))`.
    pub fn child(&self, tag: u64) -> Self {
        let id = splitmix64(self.stream_id ^ splitmix64(tag.wrapping_add(1)));
        Self {
            seed: self.seed,
            stream_id: id,
        }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

#[inline]
pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Inverse-gamma draw with shape `shape` and scale (rate of the underlying
/// gamma) `scale`: the reciprocal of a Gamma(shape, rate = scale) variate.
#[inline]
pub fn inv_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, scale: f64) -> f64 {
    debug_assert!(shape > 0.0 && scale > 0.0, "IG({shape}, {scale})");
    let g: f64 = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
    scale / g
}
