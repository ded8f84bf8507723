//! SINR distribution through the shot-noise Laplace transform.
//!
//! For one half-annulus, `ln E[e^{−sI}] = −ηπ ∫ r·t/(1+t) dr` with
//! `t = s·P_k·r^{−α}`. The exact CDF expands the integer-m Gamma tail
//! `P(g > z) = e^{−mz} Σ_{n<m} (mz)^n/n!` as the Taylor coefficients of
//! `L(s(1−w))` in `w`, all of which are positive.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::{integrate, QuadratureSpec};

use super::ChannelConfig;

const MAX_SERIES_TERMS: usize = 200;

fn radial_spec() -> QuadratureSpec {
    QuadratureSpec::with_tolerances(1e-300, 1e-11)
}

/// `∫_{r_min}^{R} r·t^j/(1+t)^{j+1} dr` (j ≥ 1) or `∫ r·t/(1+t) dr` (j = 0).
fn radial_moment(cfg: &ChannelConfig, s: f64, j: u32) -> Result<f64> {
    let (r0, r1) = (cfg.exclusion_radius_m, cfg.region_radius_m);
    if r1 <= r0 || s == 0.0 {
        return Ok(0.0);
    }
    let sp = s * cfg.interferer_power_w();
    let alpha = cfg.path_loss_exp;
    let f = |r: f64| {
        if r == 0.0 {
            return 0.0;
        }
        let t = sp * r.powf(-alpha);
        let frac = t / (1.0 + t);
        if j == 0 {
            r * frac
        } else {
            r * frac.powi(j as i32) / (1.0 + t)
        }
    };
    Ok(integrate(f, r0, r1, &radial_spec())?.value)
}

/// Laplace transform of the interference from one half-annulus.
pub fn interference_laplace(s: f64, cfg: &ChannelConfig) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::domain("laplace argument", s, ">= 0"));
    }
    if cfg.ppp_intensity == 0.0 {
        return Ok(1.0);
    }
    Ok((-cfg.ppp_intensity * PI * radial_moment(cfg, s, 0)?).exp())
}

fn check_sinr(gamma: f64, cfg: &ChannelConfig) -> Result<()> {
    if !(gamma > 0.0) {
        return Err(Error::domain("sinr", gamma, "> 0"));
    }
    if cfg.pin_fading {
        return Err(Error::Unsupported("SINR distribution with pinned fading"));
    }
    Ok(())
}

/// SINR CDF with the Alzer approximation of the Gamma CDF.
pub fn sinr_cdf(gamma: f64, cfg: &ChannelConfig) -> Result<f64> {
    check_sinr(gamma, cfg)?;
    if gamma == f64::INFINITY {
        return Ok(1.0);
    }
    let m = cfg.nakagami_m;
    let y = gamma * cfg.link_distance_m.powf(cfg.path_loss_exp) / cfg.tx_power_w();
    let beta = cfg.alzer_beta();
    let noise = cfg.noise_power_w();
    let mut ccdf = 0.0;
    let mut binom = 1.0;
    for k in 1..=m {
        binom *= (m - k + 1) as f64 / k as f64;
        let s = k as f64 * beta * y;
        let l = interference_laplace(s, cfg)?;
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        ccdf += sign * binom * (-s * noise).exp() * l * l;
    }
    Ok((1.0 - ccdf).clamp(0.0, 1.0))
}

/// Exact `(CDF, CCDF)` at `gamma`, each accurate in its own tail.
pub fn sinr_tails(gamma: f64, cfg: &ChannelConfig) -> Result<(f64, f64)> {
    check_sinr(gamma, cfg)?;
    if gamma == f64::INFINITY {
        return Ok((1.0, 0.0));
    }
    let m = cfg.nakagami_m as usize;
    let s = m as f64 * gamma * cfg.link_distance_m.powf(cfg.path_loss_exp) / cfg.tx_power_w();
    let noise = cfg.noise_power_w();
    let eta = cfg.ppp_intensity;
    let interfered = eta > 0.0 && cfg.region_radius_m > cfg.exclusion_radius_m;

    // κ_j = [w^j] (Λ(s) − Λ(s(1−w))) with Λ the cumulant of I + N.
    let kappa = |j: usize| -> Result<f64> {
        let mut k = if j == 1 { s * noise } else { 0.0 };
        if interfered {
            k += 2.0 * eta * PI * radial_moment(cfg, s, j as u32)?;
        }
        Ok(k)
    };
    let lambda = s * noise
        + if interfered {
            2.0 * eta * PI * radial_moment(cfg, s, 0)?
        } else {
            0.0
        };
    let g = (-lambda).exp();

    let mut kappas: Vec<f64> = vec![0.0];
    let mut coef: Vec<f64> = vec![1.0];
    let next = |coef: &mut Vec<f64>, kappas: &mut Vec<f64>| -> Result<f64> {
        let n = coef.len() - 1;
        kappas.push(kappa(n + 1)?);
        let mut acc = 0.0;
        for k in 0..=n {
            acc += (k + 1) as f64 * kappas[k + 1] * coef[n - k];
        }
        let c = acc / (n + 1) as f64;
        coef.push(c);
        Ok(c)
    };
    while coef.len() < m {
        next(&mut coef, &mut kappas)?;
    }
    let ccdf = (g * coef.iter().sum::<f64>()).min(1.0);
    if ccdf <= 0.999 {
        return Ok((1.0 - ccdf, ccdf));
    }
    let mut tail = 0.0;
    for n in m..MAX_SERIES_TERMS {
        let c = next(&mut coef, &mut kappas)?;
        tail += c;
        if n >= m + 2 && c <= 1e-16 * tail {
            return Ok(((g * tail).min(1.0), ccdf));
        }
    }
    Ok((1.0 - ccdf, ccdf))
}

/// Exact SINR CDF for integer Nakagami shape.
pub fn sinr_cdf_exact(gamma: f64, cfg: &ChannelConfig) -> Result<f64> {
    Ok(sinr_tails(gamma, cfg)?.0)
}
