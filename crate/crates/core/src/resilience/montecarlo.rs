use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{sample_normal, RandomStream};
use crate::sync::{offset_step, DelaySource};

/// Minimum number of conditioning events for a TCME estimate.
pub const MIN_CONDITIONING: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct TcmeEstimate {
    pub value: f64,
    /// 95% half-width.
    pub half_width: f64,
    pub conditioning: usize,
    pub samples: u64,
}

const CHUNK: u64 = 1 << 15;

/// Empirical `E[(θξ − (1−θ)u)² − ε | ξ² > ε]` with `ξ ~ N(0, σ_l²)` and
/// `u = τ − mean`, τ drawn from `source`.
pub fn tcme_monte_carlo<D: DelaySource + ?Sized>(
    theta: f64,
    sigma_l: f64,
    source: &D,
    mean: f64,
    epsilon: f64,
    n: u64,
    stream: RandomStream,
) -> Result<TcmeEstimate> {
    crate::sync::check_theta(theta)?;
    if !(sigma_l >= 0.0) || !(epsilon >= 0.0) {
        return Err(Error::domain(
            "sigma_l / epsilon",
            sigma_l.min(epsilon),
            ">= 0",
        ));
    }
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<(usize, f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream.substream(c).rng();
            let len = CHUNK.min(n - c * CHUNK);
            let (mut k, mut s1, mut s2) = (0usize, 0.0, 0.0);
            for _ in 0..len {
                let xi = sample_normal(0.0, sigma_l, &mut rng)?;
                if xi * xi > epsilon {
                    let u = source.sample_delay(&mut rng)? - mean;
                    let next = offset_step(xi, u, theta);
                    let v = next * next - epsilon;
                    k += 1;
                    s1 += v;
                    s2 += v * v;
                }
            }
            Ok((k, s1, s2))
        })
        .collect::<Result<_>>()?;
    let (mut k, mut s1, mut s2) = (0usize, 0.0, 0.0);
    for (a, b, c) in parts {
        k += a;
        s1 += b;
        s2 += c;
    }
    if k < MIN_CONDITIONING {
        return Err(Error::InsufficientSamples {
            achieved: k,
            required: MIN_CONDITIONING,
        });
    }
    let kf = k as f64;
    let mean_v = s1 / kf;
    let var = ((s2 / kf - mean_v * mean_v) * kf / (kf - 1.0)).max(0.0);
    Ok(TcmeEstimate {
        value: mean_v,
        half_width: 1.96 * (var / kf).sqrt(),
        conditioning: k,
        samples: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resilience::tcme_closed_form;
    use crate::sync::NormalDelay;

    #[test]
    fn agrees_with_closed_form() {
        let src = NormalDelay::from_variance(0.0, 1.0).unwrap();
        let est =
            tcme_monte_carlo(0.5, 1.0, &src, 0.0, 1.0, 2_000_000, RandomStream::new(41)).unwrap();
        let exact = tcme_closed_form(0.5, 1.0, 1.0, 1.0).unwrap();
        assert!(
            (est.value - exact).abs() < 2.0 * est.half_width + 1e-4,
            "{est:?} vs {exact}"
        );
    }

    #[test]
    fn starved_conditioning_reported() {
        let src = NormalDelay::from_variance(0.0, 1.0).unwrap();
        let r = tcme_monte_carlo(0.5, 0.1, &src, 0.0, 1.0, 100_000, RandomStream::new(42));
        assert!(matches!(
            r,
            Err(Error::InsufficientSamples {
                achieved: 0,
                required: 1000
            })
        ));
    }
}
