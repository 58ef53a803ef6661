//! Seeded, stream-addressable randomness.
//!
//! Every stochastic operation draws from an explicit substream of a master
//! seed, so any result is bit-reproducible from `(seed, stream id)` alone and
//! independent substreams can fan out across workers.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::scalar::{Real, C};

/// Factory for independent substreams of one master seed.
#[derive(Debug, Clone, Copy)]
pub struct SeedStreams {
    master: u64,
}

impl SeedStreams {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Counter-addressed substream; distinct ids never overlap.
    pub fn stream(&self, id: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(id);
        rng
    }
}

/// One standard normal draw, converted to the crate scalar.
#[inline]
pub fn standard_normal<T: Real>(rng: &mut impl Rng) -> T {
    let x: f64 = rng.sample(StandardNormal);
    T::of(x)
}

/// One circularly-symmetric complex Gaussian draw with unit variance
/// (`E|z|^2 = 1`).
#[inline]
pub fn complex_normal<T: Real>(rng: &mut impl Rng) -> C<T> {
    let scale = T::of(std::f64::consts::FRAC_1_SQRT_2);
    C::new(
        standard_normal::<T>(rng) * scale,
        standard_normal::<T>(rng) * scale,
    )
}
