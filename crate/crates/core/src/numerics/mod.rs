//! Special functions, quadrature and seeded sampling shared by every module.

pub mod quadrature;
pub mod random;
pub mod special;

pub use quadrature::{integrate, try_integrate, Integral, QuadratureSpec, TailPolicy};
pub use random::{
    sample_exponential, sample_gamma, sample_normal, sample_poisson, RandomStream, SimRng,
};
pub use special::{erf, erf_inverse, erfc, erfcx, normal_cdf};
