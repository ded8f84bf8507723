//! Attack/recovery scenarios: configuration, episodes, per-slot metrics and
//! the oracle self-check used by `platoon validate`.

mod experiment;
mod validate;

pub use experiment::{
    run_episode, run_experiment, write_metrics_csv, Episode, RunSummary, ScenarioMetrics,
    SlotMetrics, MIN_CONDITIONING_EVENTS,
};
pub use validate::{validate_suite, Check};

use serde::{Deserialize, Serialize};

use crate::channel::{delay_moments_quadrature, ChannelConfig};
use crate::error::{Error, Result};
use crate::risk::{epsilon_hat, KinematicsConfig};
use crate::sync::{DelaySource, DiffusionConfig, NormalDelay};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Design {
    /// Diffusion update with factor θ.
    #[default]
    Resilient,
    /// Copy the received clock: ξ^l = −u^{l−1}.
    Reliable,
}

/// Where the per-slot delays come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DelayModel {
    /// Full PPP/Nakagami channel sampler.
    #[default]
    Channel,
    /// Normal with the channel's quadrature mean and variance.
    Normal,
}

/// How μᵢ is chosen for delay compensation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Compensation {
    /// Quadrature mean of the (scaled) channel delay.
    #[default]
    Quadrature,
    /// `diffusion.compensation_mean_s` as given.
    Configured,
}

/// One attack/recovery experiment. The TTC threshold is `kinematics.t_hat_s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub channel: ChannelConfig,
    pub diffusion: DiffusionConfig<f64>,
    pub kinematics: KinematicsConfig<f64>,
    /// Slot at which ξ is redrawn from N(0, σ₀²).
    pub attack_slot: usize,
    #[serde(default)]
    pub design: Design,
    pub episodes: usize,
    pub seed: u64,
    #[serde(default)]
    pub delay_model: DelayModel,
    #[serde(default)]
    pub compensation: Compensation,
    /// When set, `channel.delay_scale` is replaced by the scale giving this σᵢ².
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_delay_variance_s2: Option<f64>,
}

impl Scenario {
    /// Table I channel and kinematics (t̂ = 4 s), θ = 0.45, σ₀² = 9 s², attack at l = 2.
    pub fn table_one() -> Self {
        Self {
            channel: ChannelConfig::default(),
            diffusion: DiffusionConfig {
                theta: 0.45,
                initial_variance_s2: 9.0,
                slot_interval_s: 0.1,
                horizon: 20,
                compensation_mean_s: 0.0,
            },
            kinematics: KinematicsConfig::table_one(4.0),
            attack_slot: 2,
            design: Design::Resilient,
            episodes: 10_000,
            seed: 20_240_101,
            delay_model: DelayModel::Channel,
            compensation: Compensation::Quadrature,
            target_delay_variance_s2: None,
        }
    }

    /// Dense traffic with limited bandwidth: η = 0.03, B = 12 MHz, σᵢ² calibrated to 0.01 s².
    pub fn fig4() -> Self {
        let mut s = Self::table_one();
        s.channel.ppp_intensity = 0.03;
        s.channel.bandwidth_hz = 12e6;
        s.target_delay_variance_s2 = Some(FIG4_DELAY_VARIANCE_S2);
        s
    }

    pub fn with_design(mut self, design: Design) -> Self {
        self.design = design;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        self.diffusion.validate()?;
        self.kinematics.validate()?;
        if self.attack_slot >= self.diffusion.horizon {
            return Err(Error::Config(format!(
                "attack_slot ({}) must be below diffusion.horizon ({})",
                self.attack_slot, self.diffusion.horizon
            )));
        }
        if self.episodes < 1 {
            return Err(Error::Config("episodes must be >= 1".into()));
        }
        if let Some(v) = self.target_delay_variance_s2 {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "target_delay_variance_s2 must be > 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Applies the calibration and compensation choices.
    pub fn resolve(&self) -> Result<ResolvedScenario> {
        self.validate()?;
        let mut channel = self.channel.clone();
        if let Some(target) = self.target_delay_variance_s2 {
            channel.delay_scale = calibrate_delay_scale(&channel, target)?;
        }
        let stats = delay_moments_quadrature(&channel)?;
        let mut diffusion = self.diffusion;
        if self.compensation == Compensation::Quadrature {
            diffusion.compensation_mean_s = stats.mean_s;
        }
        let epsilon_hat_s = epsilon_hat(self.kinematics.t_hat_s, &self.kinematics)?;
        let source = match self.delay_model {
            DelayModel::Channel => Source::Channel(channel.clone()),
            DelayModel::Normal => {
                Source::Normal(NormalDelay::from_variance(stats.mean_s, stats.variance_s2)?)
            }
        };
        Ok(ResolvedScenario {
            scenario: self.clone(),
            channel,
            diffusion,
            delay_mean_s: stats.mean_s,
            delay_variance_s2: stats.variance_s2,
            epsilon_hat_s,
            source,
        })
    }
}

/// σᵢ² used by the Fig. 4 preset.
pub const FIG4_DELAY_VARIANCE_S2: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
enum Source {
    Channel(ChannelConfig),
    Normal(NormalDelay),
}

impl DelaySource for Source {
    fn sample_delay(&self, rng: &mut crate::numerics::SimRng) -> Result<f64> {
        match self {
            Source::Channel(c) => c.sample_delay(rng),
            Source::Normal(n) => n.sample_delay(rng),
        }
    }
}

/// A scenario with its calibrated channel, compensation and ε̂ fixed.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedScenario {
    pub scenario: Scenario,
    pub channel: ChannelConfig,
    pub diffusion: DiffusionConfig<f64>,
    pub delay_mean_s: f64,
    pub delay_variance_s2: f64,
    pub epsilon_hat_s: f64,
    source: Source,
}

impl ResolvedScenario {
    pub fn delay_source(&self) -> &dyn DelaySource {
        &self.source
    }
}

/// Delay scale that makes the quadrature delay variance equal `target_s2`.
///
/// The delay is linear in the scale, so σᵢ² grows with its square and one
/// evaluation at the current scale suffices.
pub fn calibrate_delay_scale(cfg: &ChannelConfig, target_s2: f64) -> Result<f64> {
    if !(target_s2 > 0.0 && target_s2.is_finite()) {
        return Err(Error::domain("target delay variance", target_s2, "> 0"));
    }
    let base = delay_moments_quadrature(cfg)?;
    if !(base.variance_s2 > 0.0 && base.variance_s2.is_finite()) {
        return Err(Error::domain(
            "delay variance at current scale",
            base.variance_s2,
            "finite and > 0",
        ));
    }
    Ok(cfg.delay_scale * (target_s2 / base.variance_s2).sqrt())
}
