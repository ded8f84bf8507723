//! Globally adaptive 7/15-point Gauss–Kronrod quadrature.
//!
//! Finite intervals are bisected where the local error estimate is largest
//! until the total error meets `max(abs_tol, rel_tol·|I|)`. An upper limit of
//! `+∞` is handled by integrating consecutive panels of doubling width and
//! truncating once a panel contributes less than `cutoff_ratio` of the running
//! total (the integrand is assumed to decay).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// How an improper upper limit is truncated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailPolicy {
    /// Width of the first panel after the lower limit.
    pub initial_width: f64,
    /// Stop once a panel's contribution falls below this fraction of the running total.
    pub cutoff_ratio: f64,
    pub max_panels: usize,
}

impl Default for TailPolicy {
    fn default() -> Self {
        Self {
            initial_width: 1.0,
            cutoff_ratio: 1e-14,
            max_panels: 200,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    pub tail: TailPolicy,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_subdivisions: 2000,
            tail: TailPolicy::default(),
        }
    }
}

impl QuadratureSpec {
    pub fn with_tolerances(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) {
            return Err(Error::domain("abs_tol", self.abs_tol, "> 0"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::domain("rel_tol", self.rel_tol, "> 0"));
        }
        if self.max_subdivisions < 1 {
            return Err(Error::domain(
                "max_subdivisions",
                self.max_subdivisions as f64,
                ">= 1",
            ));
        }
        if !(self.tail.initial_width > 0.0) || !(self.tail.cutoff_ratio > 0.0) {
            return Err(Error::Config(
                "tail policy widths and ratios must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
    pub subdivisions: usize,
}

// Kronrod abscissae (descending, last is the centre) and weights; every other
// node from index 1 is a Gauss node.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn eval<F>(f: &mut F, x: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let y = f(x)?;
    if y.is_finite() {
        Ok(y)
    } else {
        Err(Error::NonFinite { x })
    }
}

/// One 15-point Kronrod rule on [a, b] with the QUADPACK error heuristic.
fn gk15<F>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = eval(f, centre)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_sum = kronrod.abs();
    let mut fv = [(0.0, 0.0); 7];
    for (j, &x) in XGK[..7].iter().enumerate() {
        let dx = half * x;
        let f1 = eval(f, centre - dx)?;
        let f2 = eval(f, centre + dx)?;
        fv[j] = (f1, f2);
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (fc - mean).abs();
    for (j, &(f1, f2)) in fv.iter().enumerate() {
        asc += WGK[j] * ((f1 - mean).abs() + (f2 - mean).abs());
    }
    let value = kronrod * half;
    let abs_sum = abs_sum * half.abs();
    let asc = asc * half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && err != 0.0 {
        err = asc * (200.0 * err / asc).powf(1.5).min(1.0);
    }
    if abs_sum > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * abs_sum);
    }
    Ok((value, err))
}

fn adaptive<F>(f: &mut F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<Integral>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (value, error) = gk15(f, a, b)?;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    let mut subdivisions = 1;
    loop {
        let tol = spec.abs_tol.max(spec.rel_tol * total.abs());
        if total_err <= tol {
            break;
        }
        if subdivisions >= spec.max_subdivisions {
            return Err(Error::NonConvergence {
                estimate: total,
                abs_error: total_err,
                subdivisions,
            });
        }
        let worst = heap.pop().expect("heap never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval exhausted at machine precision; accept what we have.
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk15(f, worst.a, mid)?;
        let (v2, e2) = gk15(f, mid, worst.b)?;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
        subdivisions += 1;
    }
    // Re-sum to shed accumulated update round-off.
    let (value, abs_error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
    Ok(Integral {
        value,
        abs_error,
        subdivisions,
    })
}

fn to_infinity<F>(f: &mut F, a: f64, spec: &QuadratureSpec) -> Result<Integral>
where
    F: FnMut(f64) -> Result<f64>,
{
    let policy = spec.tail;
    let mut lo = a;
    let mut width = policy.initial_width;
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut subdivisions = 0;
    let mut quiet_panels = 0;
    for _ in 0..policy.max_panels {
        let hi = lo + width;
        if !hi.is_finite() {
            break;
        }
        let panel = adaptive(f, lo, hi, spec).map_err(|e| match e {
            Error::NonConvergence {
                estimate,
                abs_error,
                subdivisions: s,
            } => Error::NonConvergence {
                estimate: total + estimate,
                abs_error: total_err + abs_error,
                subdivisions: subdivisions + s,
            },
            other => other,
        })?;
        total += panel.value;
        total_err += panel.abs_error;
        subdivisions += panel.subdivisions;
        if panel.value.abs() <= policy.cutoff_ratio * total.abs()
            || (total == 0.0 && panel.value == 0.0)
        {
            quiet_panels += 1;
            if quiet_panels >= 2 {
                return Ok(Integral {
                    value: total,
                    abs_error: total_err,
                    subdivisions,
                });
            }
        } else {
            quiet_panels = 0;
        }
        lo = hi;
        width *= 2.0;
    }
    Err(Error::NonConvergence {
        estimate: total,
        abs_error: total_err,
        subdivisions,
    })
}

/// Integrates a fallible integrand over [a, b]; `b` may be `+∞`.
pub fn try_integrate<F>(mut f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<Integral>
where
    F: FnMut(f64) -> Result<f64>,
{
    spec.validate()?;
    if !a.is_finite() {
        return Err(Error::domain("lower limit", a, "finite"));
    }
    if b.is_nan() || b == f64::NEG_INFINITY {
        return Err(Error::domain("upper limit", b, "finite or +inf"));
    }
    if b == f64::INFINITY {
        return to_infinity(&mut f, a, spec);
    }
    if a == b {
        return Ok(Integral {
            value: 0.0,
            abs_error: 0.0,
            subdivisions: 0,
        });
    }
    if b < a {
        let r = adaptive(&mut f, b, a, spec)?;
        return Ok(Integral {
            value: -r.value,
            ..r
        });
    }
    adaptive(&mut f, a, b, spec)
}

/// Integrates `f` over [a, b]; `b` may be `+∞`.
pub fn integrate<F>(mut f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<Integral>
where
    F: FnMut(f64) -> f64,
{
    try_integrate(|x| Ok(f(x)), a, b, spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| x * x, 0.0, 1.0, &spec()).unwrap();
        assert!((r.value - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn improper_exponential() {
        let r = integrate(|x| (-x).exp(), 0.0, f64::INFINITY, &spec()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-10, "{}", r.value);
    }

    #[test]
    fn improper_gaussian_moment() {
        let r = integrate(|x| x * (-x * x).exp(), 0.0, f64::INFINITY, &spec()).unwrap();
        assert!((r.value - 0.5).abs() < 1e-10, "{}", r.value);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let r = integrate(|x| x.cos(), 1.0, 0.0, &spec()).unwrap();
        assert!((r.value + 1f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn endpoint_singularity_converges() {
        // ∫₀¹ x^{-1/2} dx = 2
        let s = QuadratureSpec::with_tolerances(1e-10, 1e-10);
        let r = integrate(|x| if x > 0.0 { x.powf(-0.5) } else { 0.0 }, 0.0, 1.0, &s).unwrap();
        assert!((r.value - 2.0).abs() < 1e-8, "{}", r.value);
    }

    #[test]
    fn non_convergence_reports_partial_estimate() {
        let s = QuadratureSpec {
            max_subdivisions: 3,
            ..QuadratureSpec::with_tolerances(1e-15, 1e-15)
        };
        let err = integrate(|x| (50.0 * x).sin().abs(), 0.0, 10.0, &s).unwrap_err();
        match err {
            Error::NonConvergence {
                estimate,
                subdivisions,
                ..
            } => {
                assert_eq!(subdivisions, 3);
                assert!(estimate.is_finite() && estimate > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let err = integrate(|x| 1.0 / (x - 0.5), 0.0, 1.0, &spec()).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn invalid_spec_rejected() {
        let s = QuadratureSpec {
            abs_tol: 0.0,
            ..spec()
        };
        assert!(integrate(|x| x, 0.0, 1.0, &s).is_err());
        let s = QuadratureSpec {
            max_subdivisions: 0,
            ..spec()
        };
        assert!(integrate(|x| x, 0.0, 1.0, &s).is_err());
    }

    #[test]
    fn linear_in_integrand() {
        let f = |x: f64| (x * 3.0).sin() + x * x;
        let g = |x: f64| (-x).exp();
        let s = spec();
        let lhs = integrate(|x| 2.0 * f(x) - 0.5 * g(x), 0.0, 2.0, &s)
            .unwrap()
            .value;
        let rhs = 2.0 * integrate(f, 0.0, 2.0, &s).unwrap().value
            - 0.5 * integrate(g, 0.0, 2.0, &s).unwrap().value;
        assert!((lhs - rhs).abs() < 1e-9);
    }
}
