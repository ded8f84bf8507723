//! Rear-end collision risk under a clock-offset-induced braking delay.
//!
//! Both vehicles drive at `V` with gap `X`. At `t₀` the predecessor brakes at
//! constant `a < 0`; the follower starts braking `Δt = t_d − ξ` later, where
//! `ξ ≤ 0` is its clock offset. Time is measured from `t₀` throughout.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KinematicsConfig<T> {
    /// Common platoon speed V (m/s).
    pub speed_mps: T,
    /// Braking acceleration a (m/s², negative).
    pub braking_mps2: T,
    /// Initial gap X (m).
    pub headway_m: T,
    /// Processing delay t_d (s).
    pub processing_delay_s: T,
    /// TTC safety threshold t̂ (s).
    pub t_hat_s: T,
}

impl<T: Real> KinematicsConfig<T> {
    pub fn new(speed: T, braking: T, headway: T, processing_delay: T, t_hat: T) -> Result<Self> {
        let cfg = Self {
            speed_mps: speed,
            braking_mps2: braking,
            headway_m: headway,
            processing_delay_s: processing_delay,
            t_hat_s: t_hat,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Worst case X = t_d·V: any non-zero offset eventually causes contact.
    pub fn worst_case(speed: T, braking: T, processing_delay: T, t_hat: T) -> Result<Self> {
        Self::new(
            speed,
            braking,
            processing_delay * speed,
            processing_delay,
            t_hat,
        )
    }

    /// V = 25 m/s, a = −6 m/s², X = 10 m, t_d = 0.4 s.
    pub fn table_one(t_hat: T) -> Self {
        Self {
            speed_mps: T::lit(25.0),
            braking_mps2: T::lit(-6.0),
            headway_m: T::lit(10.0),
            processing_delay_s: T::lit(0.4),
            t_hat_s: t_hat,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let z = T::zero();
        if !(self.speed_mps > z) {
            return Err(Error::domain("speed_mps", self.speed_mps.as_f64(), "> 0"));
        }
        if !(self.braking_mps2 < z) {
            return Err(Error::domain(
                "braking_mps2",
                self.braking_mps2.as_f64(),
                "< 0",
            ));
        }
        if !(self.headway_m > z) {
            return Err(Error::domain("headway_m", self.headway_m.as_f64(), "> 0"));
        }
        if !(self.processing_delay_s >= z) {
            return Err(Error::domain(
                "processing_delay_s",
                self.processing_delay_s.as_f64(),
                ">= 0",
            ));
        }
        Ok(())
    }

    /// Time after t₀ at which the predecessor stops, `−V/a`.
    pub fn stop_time(&self) -> T {
        -self.speed_mps / self.braking_mps2
    }

    /// TTC when the follower is still coasting at contact: `√(2X/−a)`.
    pub fn ttc_floor(&self) -> T {
        (T::lit(2.0) * self.headway_m / -self.braking_mps2).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct TtcBreakpoints<T> {
    /// Offset where contact moves from "predecessor already stopped" to "both braking".
    pub t1: T,
    /// Offset below which contact happens before the follower brakes.
    pub t2: T,
    /// Offset tolerance ε̂ for the threshold the breakpoints were built for.
    pub epsilon_hat: Option<T>,
}

/// Gap X(t) for elapsed time `t` since t₀ with follower offset `xi ≤ 0`.
pub fn relative_distance<T: Real>(t: T, xi: T, cfg: &KinematicsConfig<T>) -> Result<T> {
    let z = T::zero();
    let half = T::lit(0.5);
    if xi > z {
        return Err(Error::domain("clock offset", xi.as_f64(), "<= 0"));
    }
    let a = cfg.braking_mps2;
    let v = cfg.speed_mps;
    let lag = cfg.processing_delay_s - xi;
    let t_stop = cfg.stop_time();
    if !(t >= z) || t > t_stop + lag {
        return Err(Error::domain(
            "elapsed time",
            t.as_f64(),
            "within [t0, t_m + Δt]",
        ));
    }
    let gap = if lag <= t_stop {
        if t < lag {
            half * a * t * t
        } else if t < t_stop {
            a * lag * t - half * a * lag * lag
        } else {
            let s = t - t_stop;
            a * lag * t_stop - half * a * lag * lag + a * lag * s - half * a * s * s
        }
    } else {
        // Follower reacts only after the predecessor has stopped.
        let lead = if t < t_stop {
            v * t + half * a * t * t
        } else {
            v * t_stop + half * a * t_stop * t_stop
        };
        let follow = if t < lag {
            v * t
        } else {
            let s = t - lag;
            v * t + half * a * s * s
        };
        lead - follow
    };
    Ok(cfg.headway_m + gap)
}

/// Branch offsets t₁ and t₂ of the piecewise TTC.
pub fn branch_thresholds<T: Real>(cfg: &KinematicsConfig<T>) -> Result<TtcBreakpoints<T>> {
    let a = cfg.braking_mps2;
    let v = cfg.speed_mps;
    let x = cfg.headway_m;
    let disc = v * v + T::lit(2.0) * a * x;
    if disc < T::zero() {
        return Err(Error::Kinematics {
            discriminant: disc.as_f64(),
        });
    }
    let t1 = cfg.processing_delay_s + (v - disc.sqrt()) / a;
    Ok(TtcBreakpoints {
        t1,
        t2: coasting_threshold(cfg),
        epsilon_hat: None,
    })
}

/// t₂ = t_d − √(2X/−a): below it contact happens before the follower brakes.
pub fn coasting_threshold<T: Real>(cfg: &KinematicsConfig<T>) -> T {
    cfg.processing_delay_s - cfg.ttc_floor()
}

/// Breakpoints together with ε̂ for `t_hat`.
pub fn breakpoints_for<T: Real>(t_hat: T, cfg: &KinematicsConfig<T>) -> Result<TtcBreakpoints<T>> {
    let mut bp = branch_thresholds(cfg)?;
    bp.epsilon_hat = Some(epsilon_hat(t_hat, cfg)?);
    Ok(bp)
}

/// Time to collision for offset `xi ≤ 0`; `+∞` if the follower stops short.
pub fn ttc<T: Real>(xi: T, cfg: &KinematicsConfig<T>) -> Result<T> {
    if xi > T::zero() || xi.is_nan() {
        return Err(Error::domain("clock offset", xi.as_f64(), "<= 0"));
    }
    let bp = branch_thresholds(cfg)?;
    Ok(ttc_with(xi, cfg, &bp))
}

/// TTC for either sign of offset, using the follower/predecessor symmetry.
pub fn ttc_symmetric<T: Real>(xi: T, cfg: &KinematicsConfig<T>) -> Result<T> {
    ttc(-xi.abs(), cfg)
}

pub(crate) fn ttc_with<T: Real>(xi: T, cfg: &KinematicsConfig<T>, bp: &TtcBreakpoints<T>) -> T {
    let a = cfg.braking_mps2;
    let v = cfg.speed_mps;
    let x = cfg.headway_m;
    let two = T::lit(2.0);
    let lag = cfg.processing_delay_s - xi;
    if xi <= bp.t2 {
        cfg.ttc_floor()
    } else if xi < bp.t1 {
        lag / two - x / (a * lag)
    } else {
        // Contact after the predecessor stopped while the follower still brakes:
        // t_m + Δt − √(2(X − VΔt)/a).
        let radicand = two * (x - v * lag) / a;
        if radicand < T::zero() {
            T::infinity()
        } else {
            cfg.stop_time() + lag - radicand.sqrt()
        }
    }
}

/// Offset tolerance ε̂ > 0 with `ttc(−ε̂) = t̂`, from the branch-wise closed forms.
pub fn epsilon_hat<T: Real>(t_hat: T, cfg: &KinematicsConfig<T>) -> Result<T> {
    let bp = branch_thresholds(cfg)?;
    let floor = cfg.ttc_floor();
    let ttc_zero = ttc_with(T::zero(), cfg, &bp);
    check_target(t_hat, floor, ttc_zero)?;
    if (t_hat - ttc_zero).abs() <= T::lit(1e-12) * ttc_zero {
        return Ok(T::zero());
    }
    let a = cfg.braking_mps2;
    let v = cfg.speed_mps;
    let x = cfg.headway_m;
    let two = T::lit(2.0);
    let t_stop = cfg.stop_time();
    let lag = if t_hat >= t_stop && bp.t1 < T::zero() {
        // Branch 1: (Δ − c)² = 2(X − VΔ)/a with c = t̂ − t_m; smaller root.
        let c = t_hat - t_stop;
        let half_b = v / a - c;
        let prod = c * c - two * x / a;
        let disc = (half_b * half_b - prod).max(T::zero());
        prod / (-half_b + disc.sqrt())
    } else {
        // Branch 2: Δ² − 2t̂Δ − 2X/a = 0; smaller root in cancellation-free form.
        let disc = (t_hat * t_hat + two * x / a).max(T::zero());
        (-two * x / a) / (t_hat + disc.sqrt())
    };
    Ok((lag - cfg.processing_delay_s).max(T::zero()))
}

/// Bisection counterpart of [`epsilon_hat`], to `tol` seconds.
pub fn epsilon_hat_bisect<T: Real>(t_hat: T, cfg: &KinematicsConfig<T>, tol: T) -> Result<T> {
    let bp = branch_thresholds(cfg)?;
    let floor = cfg.ttc_floor();
    let ttc_zero = ttc_with(T::zero(), cfg, &bp);
    check_target(t_hat, floor, ttc_zero)?;
    // ttc(−e) is nonincreasing in e and equals the floor for e ≥ −t₂.
    let mut lo = T::zero();
    let mut hi = (-bp.t2).max(T::lit(1e-9));
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = T::lit(0.5) * (lo + hi);
        if ttc_with(-mid, cfg, &bp) >= t_hat {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(T::lit(0.5) * (lo + hi))
}

fn check_target<T: Real>(t_hat: T, floor: T, ttc_zero: T) -> Result<()> {
    if t_hat <= floor {
        return Err(Error::UnboundedTolerance {
            t_hat: t_hat.as_f64(),
            floor: floor.as_f64(),
        });
    }
    if t_hat > ttc_zero * (T::one() + T::lit(1e-12)) {
        return Err(Error::InfeasibleAtZeroOffset {
            t_hat: t_hat.as_f64(),
            ttc_zero: ttc_zero.as_f64(),
        });
    }
    Ok(())
}
