//! First two moments of the transmission delay.
//!
//! The quadrature path never forms the SINR density. With `x = ln γ`, a split
//! point `x_S` (the median) and `ψ = φ∘τ`,
//!
//! `E[ψ] = ψ(x_S) − ∫₀^∞ ψ'(x_S−t)·F(x_S−t) dt + ∫₀^∞ ψ'(x_S+t)·(1−F(x_S+t)) dt`,
//!
//! so each tail only ever sees the probability that is small there.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{try_integrate, QuadratureSpec, RandomStream};

use super::analytic::{sinr_cdf, sinr_tails};
use super::{sample_delay, ChannelConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentMethod {
    Quadrature,
    MonteCarlo,
}

/// Which SINR CDF feeds the quadrature.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CdfForm {
    #[default]
    Exact,
    Alzer,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MomentOptions {
    pub cdf: CdfForm,
    pub quadrature: QuadratureSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct DelayStats {
    pub mean_s: f64,
    pub variance_s2: f64,
    pub method: MomentMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    /// 95% half-width of the mean (Monte Carlo only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_half_width_s: Option<f64>,
    /// 95% half-width of the variance (Monte Carlo only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance_half_width_s2: Option<f64>,
}

impl DelayStats {
    pub fn std_s(&self) -> f64 {
        self.variance_s2.sqrt()
    }

    fn quadrature(mean_s: f64, variance_s2: f64) -> Self {
        Self {
            mean_s,
            variance_s2,
            method: MomentMethod::Quadrature,
            samples: None,
            mean_half_width_s: None,
            variance_half_width_s2: None,
        }
    }
}

pub fn delay_moments_quadrature(cfg: &ChannelConfig) -> Result<DelayStats> {
    delay_moments_quadrature_with(cfg, &MomentOptions::default())
}

pub fn delay_moments_quadrature_with(
    cfg: &ChannelConfig,
    opts: &MomentOptions,
) -> Result<DelayStats> {
    cfg.validate()?;
    opts.quadrature.validate()?;
    let no_interference = cfg.ppp_intensity == 0.0 || cfg.region_radius_m == cfg.exclusion_radius_m;
    if cfg.pin_fading {
        if no_interference {
            let tau = cfg.delay_for_sinr(cfg.desired_power_w() / cfg.noise_power_w());
            return Ok(DelayStats::quadrature(tau, 0.0));
        }
        return Err(Error::Unsupported(
            "quadrature moments with pinned fading and interference",
        ));
    }
    let m = cfg.nakagami_m;
    if m < 2 {
        return Err(Error::domain(
            "nakagami_m",
            m as f64,
            ">= 2 for a finite mean delay",
        ));
    }

    let tails = TailModel::new(cfg, opts.cdf)?;
    let xs = tails.median()?;
    // H̃(x) = τ(e^x)/τ(e^{x_S}) and its x-derivative.
    let h = move |x: f64| log_rate(xs) / log_rate(x);
    let dh = move |x: f64| {
        let l = log_rate(x);
        -log_rate(xs) * logistic(x) / (l * l)
    };
    let spec = &opts.quadrature;
    let mean = tails.expectation(xs, h(xs), dh, spec)?;
    let variance = if m < 3 {
        f64::INFINITY
    } else {
        let psi_s = (h(xs) - mean).powi(2);
        tails.expectation(xs, psi_s, |x| 2.0 * (h(x) - mean) * dh(x), spec)?
    };
    let unit = cfg.delay_for_sinr(xs.exp());
    Ok(DelayStats::quadrature(unit * mean, unit * unit * variance))
}

/// `ln(1 + e^x)` without overflow.
fn log_rate(x: f64) -> f64 {
    if x > 35.0 {
        x + (-x).exp()
    } else {
        x.exp().ln_1p()
    }
}

/// `e^x/(1+e^x)`.
fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

struct TailModel<'a> {
    cfg: &'a ChannelConfig,
    form: CdfForm,
    /// Below this log-SINR the Alzer CDF is continued as a power law.
    floor: Option<(f64, f64)>,
}

impl<'a> TailModel<'a> {
    fn new(cfg: &'a ChannelConfig, form: CdfForm) -> Result<Self> {
        let mut model = Self {
            cfg,
            form,
            floor: None,
        };
        if form == CdfForm::Alzer {
            let (lo, hi) = model.bracket(1e-6)?;
            let xc = model.solve(1e-6, lo, hi)?;
            model.floor = Some((xc, model.tails(xc)?.0));
        }
        Ok(model)
    }

    /// `(F, 1 − F)` at `γ = e^x`.
    fn tails(&self, x: f64) -> Result<(f64, f64)> {
        let gamma = x.exp();
        if gamma == 0.0 {
            return Ok((0.0, 1.0));
        }
        match self.form {
            CdfForm::Exact => sinr_tails(gamma, self.cfg),
            CdfForm::Alzer => {
                if let Some((xc, fc)) = self.floor {
                    if x < xc {
                        let f = fc * (self.cfg.nakagami_m as f64 * (x - xc)).exp();
                        return Ok((f, 1.0 - f));
                    }
                }
                let f = sinr_cdf(gamma, self.cfg)?;
                Ok((f, 1.0 - f))
            }
        }
    }

    fn bracket(&self, level: f64) -> Result<(f64, f64)> {
        let mut lo = 0.0;
        let mut hi = 0.0;
        while self.tails(lo)?.0 > level {
            lo -= 8.0;
            if lo < -700.0 {
                return Err(Error::domain("SINR quantile level", level, "reachable"));
            }
        }
        while self.tails(hi)?.0 < level {
            hi += 8.0;
            if hi > 700.0 {
                return Err(Error::domain("SINR quantile level", level, "reachable"));
            }
        }
        Ok((lo, hi))
    }

    fn solve(&self, level: f64, mut lo: f64, mut hi: f64) -> Result<f64> {
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.tails(mid)?.0 < level {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-10 {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    fn median(&self) -> Result<f64> {
        let (lo, hi) = self.bracket(0.5)?;
        self.solve(0.5, lo, hi)
    }

    fn expectation<D>(&self, xs: f64, psi_s: f64, dpsi: D, spec: &QuadratureSpec) -> Result<f64>
    where
        D: Fn(f64) -> f64,
    {
        let lower = try_integrate(
            |t| {
                let x = xs - t;
                let f = self.tails(x)?.0;
                Ok(if f == 0.0 { 0.0 } else { dpsi(x) * f })
            },
            0.0,
            f64::INFINITY,
            spec,
        )?;
        let upper = try_integrate(
            |t| {
                let x = xs + t;
                let q = self.tails(x)?.1;
                Ok(if q == 0.0 { 0.0 } else { dpsi(x) * q })
            },
            0.0,
            f64::INFINITY,
            spec,
        )?;
        Ok(psi_s - lower.value + upper.value)
    }
}

const CHUNK: u64 = 1 << 16;

/// Sample mean and variance of `n` delays, with 95% normal-approximation half-widths.
///
/// Chunks draw from fixed substreams and are merged in order, so the result
/// does not depend on the number of worker threads.
pub fn delay_moments_montecarlo(
    cfg: &ChannelConfig,
    n: u64,
    stream: RandomStream,
) -> Result<DelayStats> {
    cfg.validate()?;
    if n < 2 {
        return Err(Error::domain("sample count", n as f64, ">= 2"));
    }
    let shift = sample_delay(cfg, &mut stream.substream(u64::MAX).rng())?;
    let chunks = n.div_ceil(CHUNK);
    let sums: Vec<[f64; 4]> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream.substream(c).rng();
            let len = CHUNK.min(n - c * CHUNK);
            let mut s = [0.0; 4];
            for _ in 0..len {
                let d = sample_delay(cfg, &mut rng)? - shift;
                let d2 = d * d;
                s[0] += d;
                s[1] += d2;
                s[2] += d2 * d;
                s[3] += d2 * d2;
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;
    let mut tot = [0.0; 4];
    for s in &sums {
        for k in 0..4 {
            tot[k] += s[k];
        }
    }
    let nf = n as f64;
    let a = tot[0] / nf;
    let m2 = (tot[1] / nf - a * a).max(0.0);
    let m4 = tot[3] / nf - 4.0 * a * tot[2] / nf + 6.0 * a * a * tot[1] / nf - 3.0 * a.powi(4);
    let variance = m2 * nf / (nf - 1.0);
    Ok(DelayStats {
        mean_s: shift + a,
        variance_s2: variance,
        method: MomentMethod::MonteCarlo,
        samples: Some(n),
        mean_half_width_s: Some(1.96 * (variance / nf).sqrt()),
        variance_half_width_s2: Some(1.96 * ((m4 - m2 * m2).max(0.0) / nf).sqrt()),
    })
}
