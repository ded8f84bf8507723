use rand::Rng;

use crate::error::Result;
use crate::numerics::{sample_exponential, sample_gamma, sample_poisson, SimRng};

use super::ChannelConfig;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct SinrSample {
    pub desired_w: f64,
    pub interference_w: f64,
    pub noise_w: f64,
    pub sinr: f64,
    pub delay_s: f64,
}

/// Interference from one half-annulus of the PPP, Rayleigh-faded.
pub fn sample_region_interference(cfg: &ChannelConfig, rng: &mut SimRng) -> Result<f64> {
    let count = sample_poisson(cfg.ppp_intensity * cfg.region_area_m2(), rng)?;
    let r0_sq = cfg.exclusion_radius_m * cfg.exclusion_radius_m;
    let span = cfg.region_radius_m * cfg.region_radius_m - r0_sq;
    let p = cfg.interferer_power_w();
    let half_alpha = -cfg.path_loss_exp / 2.0;
    let mut total = 0.0;
    for _ in 0..count {
        let r_sq = r0_sq + rng.random::<f64>() * span;
        let g = sample_exponential(1.0, rng)?;
        total += p * g * r_sq.powf(half_alpha);
    }
    Ok(total)
}

/// Total interference over both half-annuli.
pub fn sample_interference(cfg: &ChannelConfig, rng: &mut SimRng) -> Result<f64> {
    Ok(sample_region_interference(cfg, rng)? + sample_region_interference(cfg, rng)?)
}

pub fn sample_sinr(cfg: &ChannelConfig, rng: &mut SimRng) -> Result<SinrSample> {
    let g = if cfg.pin_fading {
        1.0
    } else {
        sample_gamma(cfg.nakagami_m as f64, 1.0, rng)?
    };
    let desired = cfg.desired_power_w() * g;
    let interference = sample_interference(cfg, rng)?;
    let noise = cfg.noise_power_w();
    let sinr = desired / (interference + noise);
    Ok(SinrSample {
        desired_w: desired,
        interference_w: interference,
        noise_w: noise,
        sinr,
        delay_s: cfg.delay_for_sinr(sinr),
    })
}

pub fn sample_delay(cfg: &ChannelConfig, rng: &mut SimRng) -> Result<f64> {
    Ok(sample_sinr(cfg, rng)?.delay_s)
}
