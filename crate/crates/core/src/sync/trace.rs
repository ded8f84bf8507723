use std::io::Write;

use crate::channel::{self, ChannelConfig};
use crate::error::{Error, Result};
use crate::numerics::{sample_normal, SimRng};

use super::{clock_update, offset_step, ClockState, DiffusionConfig};

/// Anything that can produce one link delay τ per slot.
pub trait DelaySource: Sync {
    fn sample_delay(&self, rng: &mut SimRng) -> Result<f64>;
}

impl DelaySource for ChannelConfig {
    fn sample_delay(&self, rng: &mut SimRng) -> Result<f64> {
        channel::sample_delay(self, rng)
    }
}

/// Normal surrogate for the delay, parameterised by its first two moments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalDelay {
    pub mean_s: f64,
    pub std_s: f64,
}

impl NormalDelay {
    pub fn from_variance(mean_s: f64, variance_s2: f64) -> Result<Self> {
        if !(variance_s2 >= 0.0) {
            return Err(Error::domain("delay variance", variance_s2, ">= 0"));
        }
        Ok(Self {
            mean_s,
            std_s: variance_s2.sqrt(),
        })
    }
}

impl DelaySource for NormalDelay {
    fn sample_delay(&self, rng: &mut SimRng) -> Result<f64> {
        sample_normal(self.mean_s, self.std_s, rng)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantDelay(pub f64);

impl DelaySource for ConstantDelay {
    fn sample_delay(&self, _rng: &mut SimRng) -> Result<f64> {
        Ok(self.0)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OffsetTrace {
    /// ξ^l for l = 0..=horizon (s).
    pub offsets: Vec<f64>,
    /// u^l = τ^l − μᵢ for l = 0..horizon (s); drives the step l → l+1.
    pub compensated: Vec<f64>,
}

impl OffsetTrace {
    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Columns `slot, xi_seconds, u_seconds`; the last slot has no delay.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["slot", "xi_seconds", "u_seconds"])?;
        for (l, xi) in self.offsets.iter().enumerate() {
            let u = self
                .compensated
                .get(l)
                .map(|u| format!("{u:e}"))
                .unwrap_or_default();
            w.write_record([l.to_string(), format!("{xi:e}"), u])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs the protocol through [`clock_update`] from ξ⁰ ~ N(0, σ₀²).
pub fn offset_trace<D: DelaySource + ?Sized>(
    cfg: &DiffusionConfig<f64>,
    source: &D,
    rng: &mut SimRng,
) -> Result<OffsetTrace> {
    cfg.validate()?;
    let xi0 = sample_normal(0.0, cfg.initial_variance_s2.sqrt(), rng)?;
    let mut state = ClockState::new(xi0, 0.0);
    let mut offsets = Vec::with_capacity(cfg.horizon + 1);
    let mut compensated = Vec::with_capacity(cfg.horizon);
    offsets.push(xi0);
    for _ in 0..cfg.horizon {
        let tau = source.sample_delay(rng)?;
        compensated.push(tau - cfg.compensation_mean_s);
        state = clock_update(state, state.reference_s, tau, cfg);
        offsets.push(state.offset());
    }
    Ok(OffsetTrace {
        offsets,
        compensated,
    })
}

/// Iterates [`offset_step`] over given compensated delays.
pub fn offsets_from_delays(xi0: f64, compensated: &[f64], theta: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(compensated.len() + 1);
    let mut xi = xi0;
    out.push(xi);
    for &u in compensated {
        xi = offset_step(xi, u, theta);
        out.push(xi);
    }
    out
}

/// ξ^l = θ^l ξ⁰ − (1−θ) Σ_{k<l} θ^k u^{l−1−k}.
pub fn closed_recursion(xi0: f64, compensated: &[f64], theta: f64, l: usize) -> f64 {
    let mut acc = 0.0;
    let mut w = 1.0;
    for k in 0..l {
        acc += w * compensated[l - 1 - k];
        w *= theta;
    }
    w * xi0 - (1.0 - theta) * acc
}
