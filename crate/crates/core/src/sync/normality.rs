use crate::error::{Error, Result};
use crate::numerics::normal_cdf;
use crate::scalar::Real;

use super::check_theta;

/// √(1−θ²)³/(1−θ³) · (1−θ^{3l})/√(1−θ^{2l})³.
pub fn berry_esseen_factor<T: Real>(theta: T, l: u32) -> Result<T> {
    check_theta(theta)?;
    if l < 1 {
        return Err(Error::domain("slot", 0.0, ">= 1"));
    }
    let one = T::one();
    let t2 = theta * theta;
    let t3 = t2 * theta;
    let head = (one - t2).powf(T::lit(1.5)) / (one - t3);
    let tail =
        (one - theta.powi(3 * l as i32)) / (one - theta.powi(2 * l as i32)).powf(T::lit(1.5));
    Ok(head * tail)
}

/// The Berry–Esseen factor together with an empirically fitted constant C.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct BerryEsseenBound<T> {
    pub theta: T,
    pub slot: u32,
    pub factor: T,
    pub constant: Option<T>,
}

impl<T: Real> BerryEsseenBound<T> {
    pub fn new(theta: T, slot: u32) -> Result<Self> {
        Ok(Self {
            theta,
            slot,
            factor: berry_esseen_factor(theta, slot)?,
            constant: None,
        })
    }

    /// Smallest C covering every observed `(θ, l, KS distance)` triple.
    pub fn fit(observations: &[(T, u32, T)]) -> Result<T> {
        let mut c = T::zero();
        for &(theta, l, d) in observations {
            let f = berry_esseen_factor(theta, l)?;
            c = c.max(d / f);
        }
        Ok(c)
    }

    pub fn with_constant(mut self, c: T) -> Self {
        self.constant = Some(c);
        self
    }

    /// C·factor, when C is known.
    pub fn bound(&self) -> Option<T> {
        self.constant.map(|c| c * self.factor)
    }
}

/// Kolmogorov–Smirnov distance between the samples and N(0, σ²).
pub fn normality_distance(samples: &[f64], sigma: f64) -> Result<f64> {
    if samples.len() < 1000 {
        return Err(Error::InsufficientSamples {
            achieved: samples.len(),
            required: 1000,
        });
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::domain("sigma", sigma, "> 0"));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = normal_cdf(x, sigma);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(d)
}
