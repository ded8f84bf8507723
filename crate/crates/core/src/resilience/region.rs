//! Diffusion-factor search, feasible regions and the reliable-design baseline.

use std::io::Write;

use rayon::prelude::*;

use crate::channel::{sample_delay, ChannelConfig};
use crate::error::{Error, Result};
use crate::numerics::{erf_inverse, RandomStream};
use crate::risk::{epsilon_hat, KinematicsConfig};
use crate::sync::offset_variance;

use super::{corollary_admissible, feasibility_condition, recovery_bound, sigma_l_ceiling};

pub const DEFAULT_THETA_RESOLUTION: usize = 10_000;

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct FeasibilityResult {
    pub feasible: bool,
    /// Maximal runs of admissible grid points, as closed `[lo, hi]` intervals.
    pub admissible_theta: Vec<(f64, f64)>,
    /// σ_l² ceiling at θ* (s²).
    pub ceiling_s2: Option<f64>,
    /// Fractional recovery bound at θ* (slots).
    pub recovery_bound: Option<f64>,
    pub l_min: Option<u32>,
    pub theta_star: Option<f64>,
}

impl FeasibilityResult {
    fn infeasible() -> Self {
        Self {
            feasible: false,
            admissible_theta: Vec::new(),
            ceiling_s2: None,
            recovery_bound: None,
            l_min: None,
            theta_star: None,
        }
    }
}

fn theta_grid(resolution: usize) -> impl Iterator<Item = f64> {
    (1..=resolution).map(move |k| k as f64 / (resolution + 1) as f64)
}

fn check_resolution(resolution: usize) -> Result<()> {
    if resolution < 1000 {
        return Err(Error::domain(
            "theta resolution",
            resolution as f64,
            ">= 1000",
        ));
    }
    Ok(())
}

/// Grid search for the admissible θ minimising the recovery bound.
pub fn optimize_theta(
    epsilon_hat: f64,
    sigma_i_sq: f64,
    sigma0_sq: f64,
    resolution: usize,
) -> Result<FeasibilityResult> {
    check_resolution(resolution)?;
    if !(epsilon_hat > 0.0) {
        return Err(Error::domain("epsilon_hat", epsilon_hat, "> 0"));
    }
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    let mut best: Option<(f64, f64)> = None;
    let mut open = false;
    for th in theta_grid(resolution) {
        if !corollary_admissible(th, epsilon_hat, sigma_i_sq) {
            open = false;
            continue;
        }
        match (open, intervals.last_mut()) {
            (true, Some(last)) => last.1 = th,
            _ => intervals.push((th, th)),
        }
        open = true;
        let bound = match recovery_bound(th, epsilon_hat, sigma_i_sq, sigma0_sq) {
            Ok(b) => b,
            // σ₀² at or below the steady state: never leaves the ceiling.
            Err(Error::NoRecoveryBound { .. }) => f64::NEG_INFINITY,
            Err(e) => return Err(e),
        };
        if best.is_none_or(|(_, b)| bound < b) {
            best = Some((th, bound));
        }
    }
    let Some((theta, bound)) = best else {
        return Ok(FeasibilityResult::infeasible());
    };
    let l_min = if bound.is_finite() {
        bound.max(0.0).ceil() as u32
    } else {
        0
    };
    Ok(FeasibilityResult {
        feasible: true,
        admissible_theta: intervals,
        ceiling_s2: sigma_l_ceiling(theta, epsilon_hat, sigma_i_sq).ok(),
        recovery_bound: bound.is_finite().then_some(bound),
        l_min: Some(l_min),
        theta_star: Some(theta),
    })
}

/// Which σ_l² the region sweep tests.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvaluationSlot {
    #[default]
    SteadyState,
    Slot(u32),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionSpec {
    /// TTC thresholds; each is converted to ε̂ with the kinematics.
    pub t_hats: Vec<f64>,
    pub sigma_i_sq: Vec<f64>,
    pub sigma0_sq: f64,
    pub kinematics: KinematicsConfig<f64>,
    pub theta_resolution: usize,
    pub evaluation: EvaluationSlot,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct RegionPoint {
    pub t_hat_s: f64,
    pub epsilon_hat_s: f64,
    pub sigma_i_sq_s2: f64,
    pub resilient_feasible: bool,
    pub reliable_feasible_p75: bool,
    pub reliable_feasible_p85: bool,
    pub theta_star: Option<f64>,
    pub l_min: Option<u32>,
}

fn resilient_at(eh: f64, si2: f64, spec: &RegionSpec) -> bool {
    match spec.evaluation {
        EvaluationSlot::SteadyState => {
            theta_grid(spec.theta_resolution).any(|th| corollary_admissible(th, eh, si2))
        }
        EvaluationSlot::Slot(l) => theta_grid(spec.theta_resolution).any(|th| {
            feasibility_condition(th, eh, si2, offset_variance(l, th, spec.sigma0_sq, si2))
        }),
    }
}

/// Feasible region over `(t̂, σᵢ²)`, with the normal-surrogate reliable baseline
/// at p = 0.75 and 0.85. Rows are ordered t̂-major.
pub fn resilient_feasible_region(spec: &RegionSpec) -> Result<Vec<RegionPoint>> {
    check_resolution(spec.theta_resolution)?;
    let eps: Vec<(f64, f64)> = spec
        .t_hats
        .iter()
        .map(|&t| Ok((t, epsilon_hat(t, &spec.kinematics)?)))
        .collect::<Result<_>>()?;
    let cells: Vec<(f64, f64, f64)> = eps
        .iter()
        .flat_map(|&(t, e)| spec.sigma_i_sq.iter().map(move |&s| (t, e, s)))
        .collect();
    cells
        .into_par_iter()
        .map(|(t, eh, si2)| {
            let feasible = eh > 0.0 && resilient_at(eh, si2, spec);
            let (theta_star, l_min) = if feasible && spec.evaluation == EvaluationSlot::SteadyState
            {
                let r = optimize_theta(eh, si2, spec.sigma0_sq, spec.theta_resolution)?;
                (r.theta_star, r.l_min)
            } else {
                (None, None)
            };
            Ok(RegionPoint {
                t_hat_s: t,
                epsilon_hat_s: eh,
                sigma_i_sq_s2: si2,
                resilient_feasible: feasible,
                reliable_feasible_p75: si2 <= reliable_max_sigma_sq_normal(eh, 0.75)?,
                reliable_feasible_p85: si2 <= reliable_max_sigma_sq_normal(eh, 0.85)?,
                theta_star,
                l_min,
            })
        })
        .collect()
}

pub fn write_region_csv<W: Write>(points: &[RegionPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "t_hat_s",
        "epsilon_hat_s",
        "sigma_i_sq_s2",
        "resilient_feasible",
        "reliable_feasible_p75",
        "reliable_feasible_p85",
        "theta_star",
        "l_min",
    ])?;
    for p in points {
        w.write_record([
            p.t_hat_s.to_string(),
            p.epsilon_hat_s.to_string(),
            p.sigma_i_sq_s2.to_string(),
            p.resilient_feasible.to_string(),
            p.reliable_feasible_p75.to_string(),
            p.reliable_feasible_p85.to_string(),
            p.theta_star.map(|t| t.to_string()).unwrap_or_default(),
            p.l_min.map(|l| l.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Largest σᵢ² for which some grid θ is admissible at tolerance ε̂.
pub fn resilient_max_sigma_sq(epsilon_hat: f64, resolution: usize) -> Result<f64> {
    check_resolution(resolution)?;
    if !(epsilon_hat > 0.0) {
        return Err(Error::domain("epsilon_hat", epsilon_hat, "> 0"));
    }
    let ok = |s: f64| theta_grid(resolution).any(|th| corollary_admissible(th, epsilon_hat, s));
    let mut lo = 0.0;
    let mut hi = epsilon_hat * epsilon_hat;
    while ok(hi) {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(lo)
}

/// Reliable design with normal delays: `P(|u| < ε̂) ≥ p` ⇔ `σᵢ ≤ ε̂/(√2·erf⁻¹(p))`.
pub fn reliable_max_sigma_sq_normal(epsilon_hat: f64, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain("reliability", p, "0 < p < 1"));
    }
    let s = epsilon_hat / (std::f64::consts::SQRT_2 * erf_inverse(p)?);
    Ok(s * s)
}

/// Reliable design with channel delays: the delay scale is set so the p-quantile
/// of `|τ − μ|` equals ε̂, and the resulting variance is returned.
pub fn reliable_max_sigma_sq_empirical(
    epsilon_hat: f64,
    p: f64,
    cfg: &ChannelConfig,
    n: usize,
    stream: RandomStream,
) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain("reliability", p, "0 < p < 1"));
    }
    if n < 1000 {
        return Err(Error::InsufficientSamples {
            achieved: n,
            required: 1000,
        });
    }
    let base = cfg.with_delay_scale(1.0);
    let mut rng = stream.rng();
    let taus: Vec<f64> = (0..n)
        .map(|_| sample_delay(&base, &mut rng))
        .collect::<Result<_>>()?;
    let nf = n as f64;
    let mean = taus.iter().sum::<f64>() / nf;
    let var = taus.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let mut dev: Vec<f64> = taus.iter().map(|t| (t - mean).abs()).collect();
    dev.sort_by(f64::total_cmp);
    let q = dev[((p * nf).ceil() as usize).clamp(1, n) - 1];
    if q == 0.0 {
        return Ok(f64::INFINITY);
    }
    let scale = epsilon_hat / q;
    Ok(var * scale * scale)
}
