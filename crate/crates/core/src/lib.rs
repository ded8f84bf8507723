//! Resilient clock re-synchronization for vehicular platoons.
//!
//! * [`channel`]: stochastic V2V link (PPP interference, Nakagami fading, SINR,
//!   transmission delay) with analytical and Monte Carlo delay moments.
//! * [`sync`]: diffusion clock update, offset recursion and variance law.
//! * [`resilience`]: TCME metric, its upper bound, feasibility and recovery time.
//! * [`risk`]: time-to-collision under delayed braking.
//! * [`harness`]: attack/recovery scenarios, metrics and CSV export.

pub mod channel;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod resilience;
pub mod risk;
pub mod scalar;
pub mod sync;

pub use error::{Error, Result};
pub use scalar::Real;

/// `f64` instantiations of the generic types.
pub type Kinematics = risk::KinematicsConfig<f64>;
pub type Breakpoints = risk::TtcBreakpoints<f64>;
pub type Diffusion = sync::DiffusionConfig<f64>;
pub type Clock = sync::ClockState<f64>;
pub type TcmeEval = resilience::TcmeEvaluation<f64>;
pub type BerryEsseen = sync::BerryEsseenBound<f64>;
