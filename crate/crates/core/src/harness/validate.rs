use rand::Rng;
use serde::Serialize;

use crate::channel::{delay_moments_montecarlo, delay_moments_quadrature};
use crate::error::Result;
use crate::numerics::RandomStream;
use crate::resilience::{
    corollary_admissible, feasibility_condition, recovery_bound, sigma_l_ceiling, tcme_closed_form,
    tcme_monte_carlo, tcme_upper_bound,
};
use crate::risk::{
    branch_thresholds, epsilon_hat, epsilon_hat_bisect, relative_distance, ttc, KinematicsConfig,
};
use crate::sync::{
    closed_recursion, offset_trace, offset_variance, offset_variance_recursive, DiffusionConfig,
    NormalDelay,
};

use super::Scenario;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check {
        name,
        passed,
        detail,
    }
}

/// Oracle self-check over the scenario's channel and diffusion settings plus
/// the Table I kinematics. Deterministic in `scenario.seed`.
pub fn validate_suite(scenario: &Scenario) -> Result<Vec<Check>> {
    scenario.validate()?;
    let root = RandomStream::new(scenario.seed);
    Ok(vec![
        table_one_anchors()?,
        ttc_root_oracle(root.substream(1))?,
        epsilon_bisection()?,
        variance_law(&scenario.diffusion),
        recursion_exact(scenario, root.substream(2))?,
        delay_moments(scenario, root.substream(3))?,
        tcme_spot()?,
        tcme_oracle(root.substream(4))?,
        bound_dominates(root.substream(5))?,
        feasibility_sound(root.substream(6))?,
        recovery_crossing(root.substream(7))?,
    ])
}

fn table_one_anchors() -> Result<Check> {
    let k = KinematicsConfig::<f64>::table_one(4.0);
    let bp = branch_thresholds(&k)?;
    let got = [
        bp.t1,
        bp.t2,
        ttc(0.0, &k)?,
        epsilon_hat(4.0, &k)?,
        epsilon_hat(3.8, &k)?,
    ];
    let want = [-0.0213, -1.4257, 4.567, 0.0410, 0.0673];
    let worst = got
        .iter()
        .zip(want)
        .map(|(g, w)| (g - w).abs())
        .fold(0.0, f64::max);
    Ok(check(
        "ttc_table_one_anchors",
        worst < 1e-3,
        format!("max deviation {worst:.2e} s"),
    ))
}

fn ttc_root_oracle(stream: RandomStream) -> Result<Check> {
    let mut rng = stream.rng();
    let mut worst: f64 = 0.0;
    for _ in 0..2000 {
        let v: f64 = rng.random_range(5.0..40.0);
        let a: f64 = -rng.random_range(2.0..10.0);
        let x = rng.random_range(0.05..0.95) * v * v / (-2.0 * a);
        let k = KinematicsConfig::new(v, a, x, rng.random_range(0.0..1.0), 4.0)?;
        let xi: f64 = -rng.random_range(0.0..2.0);
        let t: f64 = ttc(xi, &k)?;
        if t.is_finite() {
            worst = worst.max(relative_distance(t, xi, &k)?.abs());
        }
    }
    Ok(check(
        "ttc_gap_closes_at_ttc",
        worst < 1e-6,
        format!("max |gap| {worst:.2e} m"),
    ))
}

fn epsilon_bisection() -> Result<Check> {
    let k = KinematicsConfig::<f64>::table_one(4.0);
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let t_hat = 1.83 + (4.56 - 1.83) * i as f64 / 199.0;
        let a = epsilon_hat(t_hat, &k)?;
        let b = epsilon_hat_bisect(t_hat, &k, 1e-13)?;
        worst = worst.max((a - b).abs());
    }
    Ok(check(
        "epsilon_hat_matches_bisection",
        worst < 1e-9,
        format!("max deviation {worst:.2e} s"),
    ))
}

fn variance_law(d: &DiffusionConfig<f64>) -> Check {
    let mut worst: f64 = 0.0;
    for l in 0..60 {
        let a = offset_variance(l, d.theta, d.initial_variance_s2, 0.01);
        let b = offset_variance_recursive(l, d.theta, d.initial_variance_s2, 0.01);
        worst = worst.max((a - b).abs() / a.max(1e-300));
    }
    check(
        "variance_law_matches_recursion",
        worst < 1e-12,
        format!("max relative deviation {worst:.2e}"),
    )
}

fn recursion_exact(scenario: &Scenario, stream: RandomStream) -> Result<Check> {
    let resolved = scenario.resolve()?;
    let d = resolved.diffusion;
    let mut worst: f64 = 0.0;
    for e in 0..200 {
        let trace = offset_trace(&d, resolved.delay_source(), &mut stream.substream(e).rng())?;
        for l in 0..trace.len() {
            let c = closed_recursion(trace.offsets[0], &trace.compensated, d.theta, l);
            worst = worst.max((c - trace.offsets[l]).abs());
        }
    }
    Ok(check(
        "offset_trace_matches_closed_recursion",
        worst < 1e-12,
        format!("max |Δξ| {worst:.2e} s"),
    ))
}

fn delay_moments(scenario: &Scenario, stream: RandomStream) -> Result<Check> {
    let resolved = scenario.resolve()?;
    let q = delay_moments_quadrature(&resolved.channel)?;
    let mc = delay_moments_montecarlo(&resolved.channel, 400_000, stream)?;
    let dm = (q.mean_s - mc.mean_s).abs();
    let dv = (q.variance_s2 - mc.variance_s2).abs();
    let ok_mean = dm <= 3.0 * mc.mean_half_width_s.unwrap_or(0.0) + 1e-3 * q.mean_s;
    let ok_var = dv <= 3.0 * mc.variance_half_width_s2.unwrap_or(0.0) + 1e-2 * q.variance_s2;
    Ok(check(
        "delay_moments_quadrature_vs_montecarlo",
        ok_mean && ok_var,
        format!(
            "mean {:.4e} vs {:.4e}, variance {:.4e} vs {:.4e}",
            q.mean_s, mc.mean_s, q.variance_s2, mc.variance_s2
        ),
    ))
}

fn tcme_spot() -> Result<Check> {
    let v: f64 = tcme_closed_form(0.5, 1.0, 1.0, 1.0)?;
    Ok(check(
        "tcme_spot_value",
        (v - -0.119).abs() < 2e-3,
        format!("h = {v:.5}"),
    ))
}

fn tcme_oracle(stream: RandomStream) -> Result<Check> {
    let mut worst: f64 = 0.0;
    let mut passed = true;
    for (i, &(th, sl, si)) in [(0.3, 1.0, 0.5), (0.5, 1.0, 1.0), (0.8, 2.0, 0.3)]
        .iter()
        .enumerate()
    {
        let src = NormalDelay {
            mean_s: 0.0,
            std_s: si,
        };
        let mc = tcme_monte_carlo(th, sl, &src, 0.0, 1.0, 400_000, stream.substream(i as u64))?;
        let cf = tcme_closed_form(th, sl, si, 1.0)?;
        let z = (mc.value - cf).abs() / mc.half_width;
        worst = worst.max(z);
        passed &= z < 2.0;
    }
    Ok(check(
        "tcme_closed_form_vs_montecarlo",
        passed,
        format!("max deviation {worst:.2} half-widths"),
    ))
}

fn bound_dominates(stream: RandomStream) -> Result<Check> {
    let mut rng = stream.rng();
    let mut bad = 0;
    for _ in 0..2000 {
        let th: f64 = rng.random_range(0.0..1.0);
        let sl = rng.random_range(1e-3..3.0);
        let si = rng.random_range(0.0..3.0);
        let eps = rng.random_range(1e-4..5.0);
        let cf: f64 = tcme_closed_form(th, sl, si, eps)?;
        if tcme_upper_bound(th, sl, si, eps) < cf - 1e-12 * cf.abs().max(1.0) {
            bad += 1;
        }
    }
    Ok(check(
        "tcme_bound_dominates",
        bad == 0,
        format!("{bad} violations"),
    ))
}

fn feasibility_sound(stream: RandomStream) -> Result<Check> {
    let mut rng = stream.rng();
    let (mut tried, mut bad) = (0, 0);
    while tried < 1000 {
        let th: f64 = rng.random_range(0.01..0.99);
        let eh: f64 = rng.random_range(0.01..0.2);
        let si2 = rng.random_range(0.0..2.0) * eh * eh;
        let sl2 = rng.random_range(0.0..1.0) * eh * eh;
        if !feasibility_condition(th, eh, si2, sl2) {
            continue;
        }
        tried += 1;
        if tcme_closed_form(th, sl2.sqrt(), si2.sqrt(), eh * eh)? >= 0.0 {
            bad += 1;
        }
    }
    Ok(check(
        "feasibility_implies_negative_tcme",
        bad == 0,
        format!("{bad} counterexamples in {tried} points"),
    ))
}

fn recovery_crossing(stream: RandomStream) -> Result<Check> {
    let mut rng = stream.rng();
    let (mut tried, mut bad) = (0, 0);
    while tried < 1000 {
        let th: f64 = rng.random_range(0.01..0.99);
        let eh: f64 = rng.random_range(0.01..0.2);
        let si2 = rng.random_range(0.0..2.0) * eh * eh;
        if !corollary_admissible(th, eh, si2) {
            continue;
        }
        let ceiling = sigma_l_ceiling(th, eh, si2)?;
        let s0 = ceiling * rng.random_range(1.5..1e4);
        let b = recovery_bound(th, eh, si2, s0)?;
        tried += 1;
        let hi = b.ceil().max(0.0) as u32;
        let tol = 1e-12 * ceiling;
        if offset_variance(hi, th, s0, si2) > ceiling + tol {
            bad += 1;
        }
        if b.floor() >= 1.0 {
            let lo = b.floor() as u32 - 1;
            if offset_variance(lo, th, s0, si2) <= ceiling - tol {
                bad += 1;
            }
        }
    }
    Ok(check(
        "recovery_bound_crosses_ceiling",
        bad == 0,
        format!("{bad} counterexamples in {tried} points"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenario_passes() {
        for c in validate_suite(&Scenario::table_one()).unwrap() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn fig4_scenario_passes() {
        for c in validate_suite(&Scenario::fig4()).unwrap() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
