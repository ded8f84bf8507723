//! Stochastic V2V link between a follower and its predecessor.
//!
//! The desired signal has Nakagami-m fading; interferers form a PPP in two
//! half-annuli (front and rear of the receiver, radii `r_min..R`) with Rayleigh
//! fading. The delay of a `D`-bit packet is `D/(B·log₂(1+γ))`, times a global
//! `delay_scale`.

mod analytic;
mod moments;
mod sampling;

pub use analytic::{interference_laplace, sinr_cdf, sinr_cdf_exact, sinr_tails};
pub use moments::{
    delay_moments_montecarlo, delay_moments_quadrature, delay_moments_quadrature_with, CdfForm,
    DelayStats, MomentMethod, MomentOptions,
};
pub use sampling::{
    sample_delay, sample_interference, sample_region_interference, sample_sinr, SinrSample,
};

use crate::error::{Error, Result};

/// `10^{(p−30)/10}` watts.
#[inline]
pub fn dbm_to_watts(p_dbm: f64) -> f64 {
    10f64.powf((p_dbm - 30.0) / 10.0)
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    /// Predecessor transmit power (dBm).
    pub tx_power_dbm: f64,
    /// Interferer transmit power (dBm).
    pub interferer_power_dbm: f64,
    /// Nakagami shape of the desired link.
    pub nakagami_m: u32,
    pub path_loss_exp: f64,
    pub link_distance_m: f64,
    /// PPP intensity η (vehicles/m²).
    pub ppp_intensity: f64,
    pub region_radius_m: f64,
    pub exclusion_radius_m: f64,
    pub noise_dbm_hz: f64,
    pub bandwidth_hz: f64,
    pub packet_bits: f64,
    #[serde(default = "one")]
    pub delay_scale: f64,
    /// Diagnostic: fix the desired-link gain to 1.
    #[serde(skip)]
    pub pin_fading: bool,
}

fn one() -> f64 {
    1.0
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            tx_power_dbm: 27.0,
            interferer_power_dbm: 27.0,
            nakagami_m: 3,
            path_loss_exp: 3.5,
            link_distance_m: 10.0,
            ppp_intensity: 0.01,
            region_radius_m: 20.0,
            exclusion_radius_m: 2.0,
            noise_dbm_hz: -174.0,
            bandwidth_hz: 20e6,
            packet_bits: 3200.0,
            delay_scale: 1.0,
            pin_fading: false,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("tx_power_dbm", self.tx_power_dbm),
            ("interferer_power_dbm", self.interferer_power_dbm),
            ("noise_dbm_hz", self.noise_dbm_hz),
        ];
        for (k, v) in finite {
            if !v.is_finite() {
                return Err(Error::Config(format!("{k} must be finite, got {v}")));
            }
        }
        if self.nakagami_m < 1 {
            return Err(Error::Config("nakagami_m must be >= 1".into()));
        }
        if !(self.path_loss_exp > 2.0 && self.path_loss_exp.is_finite()) {
            return Err(Error::Config(format!(
                "path_loss_exp must be > 2, got {}",
                self.path_loss_exp
            )));
        }
        if !(self.exclusion_radius_m >= 0.0 && self.region_radius_m >= self.exclusion_radius_m)
            || !self.region_radius_m.is_finite()
        {
            return Err(Error::Config(format!(
                "need region_radius_m >= exclusion_radius_m >= 0, got R = {}, r_min = {}",
                self.region_radius_m, self.exclusion_radius_m
            )));
        }
        let positive = [
            ("link_distance_m", self.link_distance_m),
            ("bandwidth_hz", self.bandwidth_hz),
            ("packet_bits", self.packet_bits),
            ("delay_scale", self.delay_scale),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{k} must be > 0, got {v}")));
            }
        }
        if !(self.ppp_intensity >= 0.0 && self.ppp_intensity.is_finite()) {
            return Err(Error::Config(format!(
                "ppp_intensity must be >= 0, got {}",
                self.ppp_intensity
            )));
        }
        Ok(())
    }

    /// β = m·(m!)^{−1/m}.
    pub fn alzer_beta(&self) -> f64 {
        let m = self.nakagami_m as f64;
        let ln_fact: f64 = (1..=self.nakagami_m).map(|k| (k as f64).ln()).sum();
        m * (-ln_fact / m).exp()
    }

    pub fn tx_power_w(&self) -> f64 {
        dbm_to_watts(self.tx_power_dbm)
    }

    pub fn interferer_power_w(&self) -> f64 {
        dbm_to_watts(self.interferer_power_dbm)
    }

    /// N₀B in watts.
    pub fn noise_power_w(&self) -> f64 {
        dbm_to_watts(self.noise_dbm_hz) * self.bandwidth_hz
    }

    /// Area of one half-annulus.
    pub fn region_area_m2(&self) -> f64 {
        let (r, r0) = (self.region_radius_m, self.exclusion_radius_m);
        std::f64::consts::PI * (r * r - r0 * r0) / 2.0
    }

    /// Mean received desired power P·d^{−α}.
    pub fn desired_power_w(&self) -> f64 {
        self.tx_power_w() * self.link_distance_m.powf(-self.path_loss_exp)
    }

    /// `delay_scale·D/(B·log₂(1+γ))`.
    pub fn delay_for_sinr(&self, sinr: f64) -> f64 {
        self.delay_scale * self.packet_bits * std::f64::consts::LN_2
            / (self.bandwidth_hz * sinr.ln_1p())
    }

    pub fn with_delay_scale(&self, scale: f64) -> Self {
        Self {
            delay_scale: scale,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dbm_conversion() {
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
        assert!((dbm_to_watts(27.0) - 0.5012).abs() < 1e-4);
        assert!((dbm_to_watts(0.0) - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn alzer_beta_values() {
        let mut c = ChannelConfig::default();
        c.nakagami_m = 1;
        assert!((c.alzer_beta() - 1.0).abs() < 1e-15);
        c.nakagami_m = 3;
        assert!((c.alzer_beta() - 3.0 / 6f64.cbrt()).abs() < 1e-12);
    }

    #[test]
    fn noise_only_delay() {
        let c = ChannelConfig::default();
        let snr = c.desired_power_w() / c.noise_power_w();
        let tau = c.delay_for_sinr(snr);
        assert!((tau - 5.2e-6).abs() < 0.05e-6, "{tau}");
    }

    #[test]
    fn validation() {
        assert!(ChannelConfig::default().validate().is_ok());
        let bad = [
            ChannelConfig {
                path_loss_exp: 2.0,
                ..Default::default()
            },
            ChannelConfig {
                exclusion_radius_m: 30.0,
                ..Default::default()
            },
            ChannelConfig {
                nakagami_m: 0,
                ..Default::default()
            },
            ChannelConfig {
                bandwidth_hz: 0.0,
                ..Default::default()
            },
            ChannelConfig {
                ppp_intensity: -0.1,
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{c:?}");
        }
    }

    #[test]
    fn json_round_trip_rejects_unknown_keys() {
        let c = ChannelConfig::default();
        let s = serde_json::to_string(&c).unwrap();
        assert!(!s.contains("pin_fading"));
        let back: ChannelConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        let extra = s.replace("}", ",\"beta\":1.0}");
        assert!(serde_json::from_str::<ChannelConfig>(&extra).is_err());
    }
}
