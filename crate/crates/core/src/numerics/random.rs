//! Reproducible random streams and the samplers the channel and protocol use.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, Normal, Poisson};

use crate::error::{Error, Result};

pub type SimRng = ChaCha8Rng;

/// A seed plus a stream identifier.
///
/// Two streams with the same seed but different ids produce independent
/// ChaCha sequences, so parallel episodes never share generator state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RandomStream {
    pub seed: u64,
    pub stream: u64,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    /// Child stream; deterministic in `(self, id)`.
    pub fn substream(&self, id: u64) -> Self {
        Self {
            seed: self.seed,
            stream: splitmix64(self.stream ^ splitmix64(id.wrapping_add(0x5851_f42d_4c95_7f2d))),
        }
    }

    pub fn rng(&self) -> SimRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Gamma draw parameterised by shape and mean (variance `mean²/shape`).
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, mean: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0 && shape.is_finite()) {
        return Err(Error::domain("gamma shape", shape, "> 0"));
    }
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(Error::domain("gamma mean", mean, "> 0"));
    }
    let dist =
        Gamma::new(shape, mean / shape).map_err(|_| Error::domain("gamma", shape, "valid"))?;
    Ok(dist.sample(rng))
}

pub fn sample_exponential<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<f64> {
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(Error::domain("exponential mean", mean, "> 0"));
    }
    let dist = Exp::new(1.0 / mean).map_err(|_| Error::domain("exponential mean", mean, "> 0"))?;
    Ok(dist.sample(rng))
}

pub fn sample_normal<R: Rng + ?Sized>(mean: f64, std: f64, rng: &mut R) -> Result<f64> {
    if !(std >= 0.0 && std.is_finite()) || !mean.is_finite() {
        return Err(Error::domain("normal std", std, ">= 0"));
    }
    let dist = Normal::new(mean, std).map_err(|_| Error::domain("normal std", std, ">= 0"))?;
    Ok(dist.sample(rng))
}

pub fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<u64> {
    if !(mean >= 0.0 && mean.is_finite()) {
        return Err(Error::domain("poisson mean", mean, ">= 0"));
    }
    if mean == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean).map_err(|_| Error::domain("poisson mean", mean, ">= 0"))?;
    Ok(dist.sample(rng) as u64)
}
