//! TCME resilience metric and the feasibility / recovery-time theory built on it.
//!
//! `h^l(ε) = E[(ξ^{l+1})² − ε | (ξ^l)² > ε]` with `ξ^l ~ N(0, σ_l²)`. A design is
//! resilient at slot `l` when `h^l(ε̂²) < 0`: a violation is, on average,
//! pulled back inside the tolerance on the next slot.
//!
//! `epsilon` arguments are squared thresholds (s²); `epsilon_hat` arguments
//! are offset tolerances (s).

mod montecarlo;
mod region;

pub use montecarlo::{tcme_monte_carlo, TcmeEstimate};
pub use region::{
    optimize_theta, reliable_max_sigma_sq_empirical, reliable_max_sigma_sq_normal,
    resilient_feasible_region, resilient_max_sigma_sq, write_region_csv, EvaluationSlot,
    FeasibilityResult, RegionPoint, RegionSpec, DEFAULT_THETA_RESOLUTION,
};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sync::{offset_variance, steady_state_variance};

fn check_unit_interval<T: Real>(theta: T) -> Result<()> {
    if !(theta >= T::zero() && theta <= T::one()) {
        return Err(Error::domain("theta", theta.as_f64(), "0 <= theta <= 1"));
    }
    Ok(())
}

/// Closed-form TCME
/// `θ²σ_l² + θ²√(2/π)σ_l√ε·e^{−ε/2σ_l²}/erfc(√ε/√2σ_l) + (1−θ)²σᵢ² − ε`.
pub fn tcme_closed_form<T: Real>(theta: T, sigma_l: T, sigma_i: T, epsilon: T) -> Result<T> {
    check_unit_interval(theta)?;
    if !(epsilon >= T::zero()) {
        return Err(Error::domain("epsilon", epsilon.as_f64(), ">= 0"));
    }
    if !(sigma_l >= T::zero()) || (sigma_l == T::zero() && epsilon > T::zero()) {
        return Err(Error::domain(
            "sigma_l",
            sigma_l.as_f64(),
            "> 0 (conditioning event has probability zero)",
        ));
    }
    let th2 = theta * theta;
    let fresh = (T::one() - theta).powi(2) * sigma_i * sigma_i;
    let mut tail = T::zero();
    if epsilon > T::zero() {
        let root_eps = epsilon.sqrt();
        let a = root_eps / (T::SQRT_2() * sigma_l);
        // e^{−a²}/erfc(a) = 1/erfcx(a).
        tail = (T::lit(2.0) / T::PI()).sqrt() * sigma_l * root_eps / a.erfcx();
    }
    Ok(th2 * (sigma_l * sigma_l + tail) + fresh - epsilon)
}

/// Upper bound `θ²(σ_l² + ε/2 + √(ε²/4 + εσ_l²)) + (1−θ)²σᵢ² − ε`.
pub fn tcme_upper_bound<T: Real>(theta: T, sigma_l: T, sigma_i: T, epsilon: T) -> T {
    let half = T::lit(0.5);
    let v = sigma_l * sigma_l;
    let cond = v + half * epsilon + (T::lit(0.25) * epsilon * epsilon + epsilon * v).sqrt();
    theta * theta * cond + (T::one() - theta).powi(2) * sigma_i * sigma_i - epsilon
}

/// `ε̂² − (1−θ)²σᵢ² ≥ θ²(ε̂ + √(ε̂² + 4σ_l²))²/4`, i.e. the upper bound is ≤ 0 at ε = ε̂².
pub fn feasibility_condition<T: Real>(
    theta: T,
    epsilon_hat: T,
    sigma_i_sq: T,
    sigma_l_sq: T,
) -> bool {
    let e2 = epsilon_hat * epsilon_hat;
    let lhs = e2 - (T::one() - theta).powi(2) * sigma_i_sq;
    let s = epsilon_hat + (e2 + T::lit(4.0) * sigma_l_sq).sqrt();
    lhs >= theta * theta * s * s / T::lit(4.0)
}

/// Largest σ_l² satisfying [`feasibility_condition`]:
/// `(√(ε̂² − (1−θ)²σᵢ²)/θ − ε̂/2)² − ε̂²/4`.
pub fn sigma_l_ceiling<T: Real>(theta: T, epsilon_hat: T, sigma_i_sq: T) -> Result<T> {
    crate::sync::check_theta(theta)?;
    let e2 = epsilon_hat * epsilon_hat;
    let rad = e2 - (T::one() - theta).powi(2) * sigma_i_sq;
    if rad < theta * theta * e2 / T::lit(4.0) {
        return Err(Error::CeilingSideCondition {
            theta: theta.as_f64(),
        });
    }
    let half = T::lit(0.5) * epsilon_hat;
    Ok((rad.sqrt() / theta - half).powi(2) - half * half)
}

/// Corollary admissibility: the condition holds at the steady-state variance.
pub fn corollary_admissible<T: Real>(theta: T, epsilon_hat: T, sigma_i_sq: T) -> bool {
    feasibility_condition(
        theta,
        epsilon_hat,
        sigma_i_sq,
        steady_state_variance(theta, sigma_i_sq),
    )
}

/// Fractional slot after which σ_l² stays below the ceiling:
/// `ln[(ε̂² − θε̂√(ε̂²−(1−θ)²σᵢ²) − s)/(θ²(σ₀² − s))]/(2 ln θ)` with `s` the
/// steady-state variance. Negative when σ₀² is already under the ceiling.
pub fn recovery_bound<T: Real>(theta: T, epsilon_hat: T, sigma_i_sq: T, sigma0_sq: T) -> Result<T> {
    crate::sync::check_theta(theta)?;
    let ss = steady_state_variance(theta, sigma_i_sq);
    if !(sigma0_sq > ss) {
        return Err(Error::NoRecoveryBound {
            reason: "initial variance at or below the steady state",
        });
    }
    let e2 = epsilon_hat * epsilon_hat;
    let rad = e2 - (T::one() - theta).powi(2) * sigma_i_sq;
    if rad < T::zero() {
        return Err(Error::NoRecoveryBound {
            reason: "delay variance exceeds the tolerance",
        });
    }
    let num = e2 - theta * epsilon_hat * rad.sqrt() - ss;
    if !(num > T::zero()) {
        return Err(Error::NoRecoveryBound {
            reason: "diffusion factor not admissible",
        });
    }
    let arg = num / (theta * theta * (sigma0_sq - ss));
    Ok(arg.ln() / (T::lit(2.0) * theta.ln()))
}

/// One evaluation of the metric with its inputs.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct TcmeEvaluation<T> {
    pub slot: Option<u32>,
    /// Squared threshold ε (s²).
    pub epsilon: T,
    pub sigma_l: T,
    pub sigma_i: T,
    pub theta: T,
    pub value: T,
}

impl<T: Real> TcmeEvaluation<T> {
    pub fn new(theta: T, sigma_l: T, sigma_i: T, epsilon: T) -> Result<Self> {
        Ok(Self {
            slot: None,
            epsilon,
            sigma_l,
            sigma_i,
            theta,
            value: tcme_closed_form(theta, sigma_l, sigma_i, epsilon)?,
        })
    }

    /// Metric at slot `l` after an attack that left variance σ₀².
    pub fn at_slot(l: u32, theta: T, sigma0_sq: T, sigma_i_sq: T, epsilon_hat: T) -> Result<Self> {
        let sigma_l = offset_variance(l, theta, sigma0_sq, sigma_i_sq).sqrt();
        let mut e = Self::new(theta, sigma_l, sigma_i_sq.sqrt(), epsilon_hat * epsilon_hat)?;
        e.slot = Some(l);
        Ok(e)
    }

    pub fn is_resilient(&self) -> bool {
        self.value < T::zero()
    }
}
