//! Error-function family.
//!
//! `erf`/`erfc` delegate to `libm` (the musl/FreeBSD implementations, accurate
//! to about one ulp). The scaled complement and the inverse are built on top.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

#[inline]
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// `exp(x²)·erfc(x)` without overflow for large positive `x`.
pub fn erfcx(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 5.0 {
        // exp(x²) overflows first for very negative x; the true value is +inf there too.
        return (x * x).exp() * erfc(x);
    }
    // Laplace continued fraction erfc(x) = e^{-x²}/√π · 1/(x + ½/(x + 1/(x + 3/2/(x + …)))),
    // evaluated bottom-up. 60 levels is far past convergence for x ≥ 5.
    let mut t = x;
    for k in (1..=60).rev() {
        t = x + 0.5 * k as f64 / t;
    }
    1.0 / (PI.sqrt() * t)
}

/// Inverse error function on (-1, 1).
///
/// Starts from Giles' single-precision polynomial and polishes with Newton
/// steps on `erf` (or on `erfc` in the tails, where `1 - p` carries the digits).
pub fn erf_inverse(p: f64) -> Result<f64> {
    if !(p > -1.0 && p < 1.0) {
        return Err(Error::domain("erf_inverse argument", p, "|p| < 1"));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    let sign = p.signum();
    let a = p.abs();
    let mut x = giles_initial(a);
    let two_over_sqrt_pi = 2.0 / PI.sqrt();
    let q = 1.0 - a;
    for _ in 0..100 {
        let deriv = two_over_sqrt_pi * (-x * x).exp();
        if deriv == 0.0 {
            break;
        }
        let step = if a > 0.5 {
            -(erfc(x) - q) / deriv
        } else {
            (erf(x) - a) / deriv
        };
        x -= step;
        if step.abs() <= 1e-16 * x.abs().max(1e-300) {
            break;
        }
    }
    Ok(sign * x)
}

fn giles_initial(a: f64) -> f64 {
    let mut w = -((1.0 - a) * (1.0 + a)).ln();
    let p = if w < 5.0 {
        w -= 2.5;
        let mut p = 2.810_226_36e-08;
        for c in [
            3.432_739_39e-07,
            -3.523_387_7e-06,
            -4.391_506_54e-06,
            0.000_218_580_87,
            -0.001_253_725_03,
            -0.004_177_681_64,
            0.246_640_727,
            1.501_409_41,
        ] {
            p = c + p * w;
        }
        p
    } else {
        w = w.sqrt() - 3.0;
        let mut p = -0.000_200_214_257;
        for c in [
            0.000_100_950_558,
            0.001_349_343_22,
            -0.003_673_428_44,
            0.005_739_507_73,
            -0.007_622_461_3,
            0.009_438_870_47,
            1.001_674_06,
            2.832_976_82,
        ] {
            p = c + p * w;
        }
        p
    };
    p * a
}

/// CDF of N(0, σ²) at `x`.
#[inline]
pub fn normal_cdf(x: f64, sigma: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2 / sigma)
}
