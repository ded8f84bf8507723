//! Diffusion clock re-synchronization.
//!
//! Each slot the follower blends its own reading with the predecessor's,
//! compensating the link delay by its mean μᵢ. The offset then follows
//! `ξ^{l+1} = θξ^l − (1−θ)u^l` with `u^l = τ^l − μᵢ`.

mod normality;
mod trace;

pub use normality::{berry_esseen_factor, normality_distance, BerryEsseenBound};
pub use trace::{
    closed_recursion, offset_trace, offsets_from_delays, ConstantDelay, DelaySource, NormalDelay,
    OffsetTrace,
};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(
    deny_unknown_fields,
    bound(deserialize = "T: Real + serde::Deserialize<'de>")
)]
pub struct DiffusionConfig<T> {
    /// Diffusion factor θ in (0, 1).
    pub theta: T,
    /// Offset variance σ₀² right after the attack (s²).
    pub initial_variance_s2: T,
    /// Slot interval T (s). Only moves timestamps, never offsets.
    #[serde(default = "default_slot")]
    pub slot_interval_s: T,
    /// Number of update slots simulated.
    pub horizon: usize,
    /// Delay compensation μᵢ (s).
    #[serde(default)]
    pub compensation_mean_s: T,
}

fn default_slot<T: Real>() -> T {
    T::lit(0.1)
}

impl<T: Real> DiffusionConfig<T> {
    pub fn new(
        theta: T,
        initial_variance_s2: T,
        horizon: usize,
        compensation_mean_s: T,
    ) -> Result<Self> {
        let cfg = Self {
            theta,
            initial_variance_s2,
            slot_interval_s: default_slot(),
            horizon,
            compensation_mean_s,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_theta(self.theta)?;
        if !(self.initial_variance_s2 >= T::zero()) {
            return Err(Error::domain(
                "initial_variance_s2",
                self.initial_variance_s2.as_f64(),
                ">= 0",
            ));
        }
        if !(self.slot_interval_s > T::zero()) {
            return Err(Error::domain(
                "slot_interval_s",
                self.slot_interval_s.as_f64(),
                "> 0",
            ));
        }
        if self.horizon < 1 {
            return Err(Error::domain("horizon", self.horizon as f64, ">= 1"));
        }
        if !self.compensation_mean_s.is_finite() {
            return Err(Error::domain(
                "compensation_mean_s",
                self.compensation_mean_s.as_f64(),
                "finite",
            ));
        }
        Ok(())
    }
}

pub(crate) fn check_theta<T: Real>(theta: T) -> Result<()> {
    if !(theta > T::zero() && theta < T::one()) {
        return Err(Error::domain("theta", theta.as_f64(), "0 < theta < 1"));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Default, serde::Serialize)]
pub struct ClockState<T> {
    /// Follower reading C_i^l (s).
    pub local_s: T,
    /// Platoon reference reading C^l (s).
    pub reference_s: T,
    pub slot: usize,
}

impl<T: Real> ClockState<T> {
    pub fn new(local_s: T, reference_s: T) -> Self {
        Self {
            local_s,
            reference_s,
            slot: 0,
        }
    }

    pub fn offset(&self) -> T {
        self.local_s - self.reference_s
    }
}

/// One diffusion update with the reading `received` that took `tau` seconds to arrive.
pub fn clock_update<T: Real>(
    state: ClockState<T>,
    received: T,
    tau: T,
    cfg: &DiffusionConfig<T>,
) -> ClockState<T> {
    let th = cfg.theta;
    let estimate = received - (tau - cfg.compensation_mean_s);
    ClockState {
        local_s: th * state.local_s + (T::one() - th) * estimate + cfg.slot_interval_s,
        reference_s: state.reference_s + cfg.slot_interval_s,
        slot: state.slot + 1,
    }
}

#[inline]
pub fn offset_step<T: Real>(xi: T, u: T, theta: T) -> T {
    theta * xi - (T::one() - theta) * u
}

/// σ_l² = θ^{2l}σ₀² + ((1−θ)/(1+θ))(1−θ^{2l})σᵢ².
pub fn offset_variance<T: Real>(l: u32, theta: T, sigma0_sq: T, sigma_i_sq: T) -> T {
    let decay = theta.powi(2 * l as i32);
    decay * sigma0_sq + steady_state_variance(theta, sigma_i_sq) * (T::one() - decay)
}

/// Limit of [`offset_variance`] as l → ∞.
pub fn steady_state_variance<T: Real>(theta: T, sigma_i_sq: T) -> T {
    (T::one() - theta) / (T::one() + theta) * sigma_i_sq
}

/// Same quantity through σ_{l+1}² = θ²σ_l² + (1−θ)²σᵢ².
pub fn offset_variance_recursive<T: Real>(l: u32, theta: T, sigma0_sq: T, sigma_i_sq: T) -> T {
    let fresh = (T::one() - theta).powi(2) * sigma_i_sq;
    let mut v = sigma0_sq;
    for _ in 0..l {
        v = theta * theta * v + fresh;
    }
    v
}
