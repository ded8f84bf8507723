//! Acceptance criteria, one test each. Every test writes a `PASS`/`FAIL` line
//! straight to stderr (so it shows without `--nocapture`) and then asserts.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;

use platoon_core::channel::{delay_moments_montecarlo, delay_moments_quadrature, ChannelConfig};
use platoon_core::harness::{run_experiment, Design, Scenario};
use platoon_core::numerics::{normal_cdf, RandomStream};
use platoon_core::resilience::{
    corollary_admissible, feasibility_condition, recovery_bound, reliable_max_sigma_sq_normal,
    resilient_feasible_region, resilient_max_sigma_sq, tcme_closed_form, tcme_monte_carlo,
    EvaluationSlot, RegionSpec, DEFAULT_THETA_RESOLUTION,
};
use platoon_core::risk::{branch_thresholds, epsilon_hat, ttc, KinematicsConfig};
use platoon_core::sync::{
    offset_trace, offset_variance, DelaySource, DiffusionConfig, NormalDelay,
};

fn report(id: u32, title: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{tag} criterion {id:>2} ({title}): {detail}");
    assert!(pass, "criterion {id} ({title}) failed: {detail}");
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

fn table_one_diffusion(theta: f64, horizon: usize, mu: f64) -> DiffusionConfig<f64> {
    DiffusionConfig::new(theta, 9.0, horizon, mu).unwrap()
}

#[test]
fn criterion_01_delay_moments_quadrature_vs_monte_carlo() {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut pass = true;
    let mut k = 0;
    for eta in [0.0, 0.01, 0.03] {
        for bw in [12e6, 20e6] {
            let cfg = ChannelConfig {
                ppp_intensity: eta,
                bandwidth_hz: bw,
                ..ChannelConfig::default()
            };
            let q = delay_moments_quadrature(&cfg).unwrap();
            let mc =
                delay_moments_montecarlo(&cfg, 10_000_000, RandomStream::new(9_000 + k)).unwrap();
            k += 1;
            let dm = (q.mean_s - mc.mean_s).abs() / mc.mean_s;
            let dv = (q.variance_s2 - mc.variance_s2).abs() / mc.variance_s2;
            pass &= dm < 0.03 && dv < 0.05;
            lines.push(format!(
                "η={eta} B={}MHz dμ={:.2}% dσ²={:.2}%",
                bw / 1e6,
                100.0 * dm,
                100.0 * dv
            ));
        }
    }
    let el = start.elapsed();
    pass &= within(el, 300);
    report(
        1,
        "delay moments",
        pass,
        &format!("{} in {:.0?}", lines.join("; "), el),
    );
}

#[test]
fn criterion_02_offset_recursion_exactness() {
    let start = Instant::now();
    let ch = ChannelConfig::default();
    let mu = delay_moments_quadrature(&ch).unwrap().mean_s;
    let root = RandomStream::new(2);
    let mut worst: f64 = 0.0;
    for (j, theta) in [0.3, 0.45, 0.85].into_iter().enumerate() {
        let cfg = table_one_diffusion(theta, 40, mu);
        let w = (0..1000u64)
            .into_par_iter()
            .map(|e| {
                let mut rng = root.substream(j as u64).substream(e).rng();
                let t = offset_trace(&cfg, &ch, &mut rng).unwrap();
                let mut w: f64 = 0.0;
                for l in 0..t.offsets.len() {
                    // ξ^l = θ^l ξ⁰ − (1−θ) Σ_{k<l} θ^k u^{l−1−k}
                    let mut s = 0.0;
                    for kk in 0..l {
                        s += theta.powi(kk as i32) * t.compensated[l - 1 - kk];
                    }
                    let want = theta.powi(l as i32) * t.offsets[0] - (1.0 - theta) * s;
                    w = w.max((want - t.offsets[l]).abs());
                }
                w
            })
            .reduce(|| 0.0, f64::max);
        worst = worst.max(w);
    }
    let el = start.elapsed();
    report(
        2,
        "offset recursion",
        worst < 1e-12 && within(el, 10),
        &format!("max |Δξ| = {worst:.2e} s over 3×10³ episodes in {el:.1?}"),
    );
}

fn offsets_at_slots(
    cfg: &DiffusionConfig<f64>,
    source: &impl DelaySource,
    slots: &[usize],
    n: u64,
    stream: RandomStream,
) -> Vec<Vec<f64>> {
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|e| {
            let t = offset_trace(cfg, source, &mut stream.substream(e).rng()).unwrap();
            slots.iter().map(|&l| t.offsets[l]).collect()
        })
        .collect();
    (0..slots.len())
        .map(|j| rows.iter().map(|r| r[j]).collect())
        .collect()
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
}

#[test]
fn criterion_03_variance_law() {
    let start = Instant::now();
    let ch = ChannelConfig::default();
    let q = delay_moments_quadrature(&ch).unwrap();
    let normal = NormalDelay::from_variance(q.mean_s, q.variance_s2).unwrap();
    let slots = [1usize, 5, 10, 20];
    let mut pass = true;
    let mut lines = Vec::new();
    for (j, theta) in [0.45, 0.85].into_iter().enumerate() {
        let cfg = table_one_diffusion(theta, 20, q.mean_s);
        let cols = offsets_at_slots(
            &cfg,
            &normal,
            &slots,
            100_000,
            RandomStream::new(30 + j as u64),
        );
        for (col, &l) in cols.iter().zip(&slots) {
            let emp = sample_variance(col);
            let want = offset_variance(l as u32, theta, 9.0, q.variance_s2);
            let rel = (emp / want - 1.0).abs();
            pass &= rel < 0.03;
            lines.push(format!("θ={theta} l={l} {:.2}%", 100.0 * rel));
        }
    }
    let el = start.elapsed();
    pass &= within(el, 120);
    report(
        3,
        "variance law",
        pass,
        &format!("{} in {el:.1?}", lines.join(", ")),
    );
}

fn ks_normal(xs: &mut [f64], sigma: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal_cdf(x, sigma);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

#[test]
fn criterion_04_normality_at_slot_ten() {
    let start = Instant::now();
    let ch = ChannelConfig::default();
    let q = delay_moments_quadrature(&ch).unwrap();
    let mut ks = Vec::new();
    for (j, theta) in [0.85, 0.3].into_iter().enumerate() {
        let cfg = table_one_diffusion(theta, 10, q.mean_s);
        let mut col = offsets_at_slots(&cfg, &ch, &[10], 100_000, RandomStream::new(40 + j as u64))
            .pop()
            .unwrap();
        let sigma = offset_variance(10, theta, 9.0, q.variance_s2).sqrt();
        ks.push(ks_normal(&mut col, sigma));
    }
    let el = start.elapsed();
    report(
        4,
        "normality",
        ks[0] < 0.02 && ks[1] > ks[0] && within(el, 120),
        &format!(
            "KS(θ=0.85) = {:.4}, KS(θ=0.3) = {:.4} in {el:.1?}",
            ks[0], ks[1]
        ),
    );
}

#[test]
fn criterion_05_tcme_closed_form_vs_monte_carlo() {
    let start = Instant::now();
    let thetas = [0.1, 0.3, 0.5, 0.7, 0.9];
    let sl_ratio = [0.5, 1.0, 1.5, 2.0, 3.0];
    let si_ratio = [0.0, 0.25, 0.5, 1.0, 2.0];
    let eh = 1.0f64;
    let mut worst: f64 = 0.0;
    let mut bad = 0;
    let mut k = 0u64;
    for &th in &thetas {
        for &rl in &sl_ratio {
            for &ri in &si_ratio {
                let src = NormalDelay {
                    mean_s: 0.0,
                    std_s: ri * eh,
                };
                let mc = tcme_monte_carlo(
                    th,
                    rl * eh,
                    &src,
                    0.0,
                    eh * eh,
                    1_000_000,
                    RandomStream::new(500 + k),
                )
                .unwrap();
                k += 1;
                let cf = tcme_closed_form(th, rl * eh, ri * eh, eh * eh).unwrap();
                let z = (mc.value - cf).abs() / mc.half_width;
                worst = worst.max(z);
                bad += usize::from(z > 2.0);
            }
        }
    }
    let spot: f64 = tcme_closed_form(0.5, 1.0, 1.0, 1.0).unwrap();
    let el = start.elapsed();
    report(
        5,
        "TCME closed form",
        bad == 0 && (spot + 0.119).abs() <= 0.002 && within(el, 300),
        &format!(
            "{bad}/125 grid points outside 2 half-widths (worst {worst:.2}), h(0.5,1,1,1) = {spot:.4} in {el:.1?}"
        ),
    );
}

#[test]
fn criterion_06_feasibility_soundness() {
    let start = Instant::now();
    let mut rng = RandomStream::new(6).rng();
    let (mut n, mut bad) = (0, 0);
    while n < 1000 {
        let th: f64 = rng.random_range(0.001..0.999);
        let eh: f64 = rng.random_range(0.005..0.5);
        let si2 = rng.random_range(0.0..3.0) * eh * eh;
        let sl2 = rng.random_range(0.0..1.5) * eh * eh;
        if !feasibility_condition(th, eh, si2, sl2) {
            continue;
        }
        n += 1;
        if tcme_closed_form(th, sl2.sqrt(), si2.sqrt(), eh * eh).unwrap() >= 0.0 {
            bad += 1;
        }
    }
    let el = start.elapsed();
    report(
        6,
        "feasibility soundness",
        bad == 0 && within(el, 60),
        &format!("{bad} counterexamples in {n} feasible points in {el:.1?}"),
    );
}

#[test]
fn criterion_07_recovery_bound_crossing() {
    let start = Instant::now();
    let mut rng = RandomStream::new(7).rng();
    let (mut n, mut bad) = (0, 0);
    while n < 1000 {
        let th: f64 = rng.random_range(0.001..0.999);
        let eh: f64 = rng.random_range(0.005..0.5);
        let si2 = rng.random_range(0.0..3.0) * eh * eh;
        if !corollary_admissible(th, eh, si2) {
            continue;
        }
        let ceiling =
            ((eh * eh - (1.0 - th).powi(2) * si2).sqrt() / th - eh / 2.0).powi(2) - eh * eh / 4.0;
        let ss = (1.0 - th) / (1.0 + th) * si2;
        let s0 = ceiling * rng.random_range(1.01..1e6);
        if s0 <= ss {
            continue;
        }
        n += 1;
        let b: f64 = recovery_bound(th, eh, si2, s0).unwrap();
        let var_at = |l: i64| {
            let mut v = s0;
            for _ in 0..l {
                v = th * th * v + (1.0 - th).powi(2) * si2;
            }
            v
        };
        let tol = 1e-10 * ceiling;
        if var_at(b.ceil() as i64) > ceiling + tol {
            bad += 1;
        }
        let lo = b.floor() as i64 - 1;
        if lo >= 0 && var_at(lo) <= ceiling - tol {
            bad += 1;
        }
    }
    let el = start.elapsed();
    report(
        7,
        "recovery crossing",
        bad == 0 && within(el, 60),
        &format!("{bad} counterexamples in {n} admissible points in {el:.1?}"),
    );
}

/// First time the gap closes, by bisection on the (non-increasing) gap.
fn ttc_oracle(xi: f64, v: f64, a: f64, x: f64, td: f64) -> f64 {
    let lag = td - xi;
    let tm = -v / a;
    let pos = |t: f64, t0: f64| {
        if t <= t0 {
            v * t
        } else {
            let s = (t - t0).min(tm);
            v * t0 + v * s + 0.5 * a * s * s
        }
    };
    let gap = |t: f64| x + pos(t, 0.0) - pos(t, lag);
    let end = lag + tm;
    if gap(end) > 0.0 {
        return f64::INFINITY;
    }
    let (mut lo, mut hi) = (0.0, end);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[test]
fn criterion_08_ttc_closed_form_vs_kinematics() {
    let start = Instant::now();
    let mut rng = RandomStream::new(8).rng();
    let mut worst: f64 = 0.0;
    let mut mismatched_inf = 0;
    for _ in 0..10_000 {
        let v: f64 = rng.random_range(5.0..40.0);
        let a: f64 = -rng.random_range(2.0..10.0);
        let x = rng.random_range(0.02..0.98) * v * v / (-2.0 * a);
        let td = rng.random_range(0.0..1.0);
        let xi: f64 = -rng.random_range(0.0..3.0);
        let k = KinematicsConfig::new(v, a, x, td, 4.0).unwrap();
        let got: f64 = ttc(xi, &k).unwrap();
        let want = ttc_oracle(xi, v, a, x, td);
        if got.is_infinite() || want.is_infinite() {
            mismatched_inf += usize::from(got != want);
        } else {
            worst = worst.max((got - want).abs());
        }
    }
    let k = KinematicsConfig::<f64>::table_one(4.0);
    let bp = branch_thresholds(&k).unwrap();
    let anchors = [
        ("t1", bp.t1, -0.0213),
        ("t2", bp.t2, -1.4257),
        ("ttc(0-)", ttc(0.0, &k).unwrap(), 4.567),
        ("eps(4)", epsilon_hat(4.0, &k).unwrap(), 0.0410),
        ("eps(3.8)", epsilon_hat(3.8, &k).unwrap(), 0.0673),
    ];
    let anchor_ok = anchors.iter().all(|&(_, g, w)| (g - w).abs() < 1e-3);
    let el = start.elapsed();
    let shown: Vec<String> = anchors
        .iter()
        .map(|(n, g, _)| format!("{n}={g:.4}"))
        .collect();
    report(
        8,
        "TTC",
        worst < 1e-6 && mismatched_inf == 0 && anchor_ok && within(el, 60),
        &format!(
            "max |Δ| = {worst:.2e} s, {mismatched_inf} finite/infinite mismatches, {} in {el:.1?}",
            shown.join(" ")
        ),
    );
}

#[test]
fn criterion_09_feasible_region_ratio_and_monotonicity() {
    let start = Instant::now();
    let k = KinematicsConfig::<f64>::table_one(3.8);
    let eh = epsilon_hat(3.8, &k).unwrap();
    let resilient = resilient_max_sigma_sq(eh, DEFAULT_THETA_RESOLUTION).unwrap();
    let reliable = reliable_max_sigma_sq_normal(eh, 0.75).unwrap();
    let ratio = resilient / reliable;

    let t_hats: Vec<f64> = (0..=30).map(|i| 3.0 + 0.05 * i as f64).collect();
    let sig: Vec<f64> = (0..=40).map(|i| 5e-4 * i as f64).collect();
    let spec = RegionSpec {
        t_hats: t_hats.clone(),
        sigma_i_sq: sig.clone(),
        sigma0_sq: 9.0,
        kinematics: k,
        theta_resolution: DEFAULT_THETA_RESOLUTION,
        evaluation: EvaluationSlot::SteadyState,
    };
    let pts = resilient_feasible_region(&spec).unwrap();
    let ns = sig.len();
    let cell = |i: usize, j: usize| &pts[i * ns + j];
    let mut violations = 0;
    for i in 0..t_hats.len() {
        for j in 0..ns {
            let p = cell(i, j);
            let flags = |q: &platoon_core::resilience::RegionPoint| {
                [
                    q.resilient_feasible,
                    q.reliable_feasible_p75,
                    q.reliable_feasible_p85,
                ]
            };
            let here = flags(p);
            // Feasibility survives smaller σᵢ² and smaller t̂.
            for nb in [(i, j.wrapping_sub(1)), (i.wrapping_sub(1), j)] {
                if nb.0 < t_hats.len() && nb.1 < ns {
                    let there = flags(cell(nb.0, nb.1));
                    violations += here.iter().zip(there).filter(|&(&h, t)| h && !t).count();
                }
            }
        }
    }
    let el = start.elapsed();
    report(
        9,
        "feasible region",
        ratio >= 5.0 && violations == 0 && within(el, 300),
        &format!(
            "ε̂ = {eh:.4} s, resilient max σᵢ² = {resilient:.5} s², reliable(p=0.75) max σᵢ² = {reliable:.5} s², \
             ratio {ratio:.2} (need ≥ 5), {violations} monotonicity violations in {el:.1?}"
        ),
    );
}

#[test]
fn criterion_10_post_attack_recovery() {
    let start = Instant::now();
    let base = Scenario::fig4();
    assert_eq!(base.episodes, 10_000);
    let res = run_experiment(&base.clone().with_design(Design::Resilient)).unwrap();
    let rel = run_experiment(&base.clone().with_design(Design::Reliable)).unwrap();
    let n = res.episodes as f64;
    let l0 = base.attack_slot;
    let horizon = base.diffusion.horizon;

    let mut dips = 0;
    for w in res.slots[l0..].windows(2) {
        let se = (2.0 * w[0].p * (1.0 - w[0].p) / n).sqrt();
        dips += usize::from(w[1].p < w[0].p - 3.0 * se);
    }
    let baseline = rel.slots[l0 + 1..].iter().map(|s| s.p).sum::<f64>() / (horizon - l0) as f64;
    let crossing = res.slots[l0 + 1..]
        .iter()
        .find(|s| s.p > baseline)
        .map(|s| s.slot - l0);
    let steady = l0 + 10;
    let ss: Vec<_> = res.slots[steady..].iter().collect();
    let p_ss = ss.iter().map(|s| s.p).sum::<f64>() / ss.len() as f64;
    let temporal: Vec<f64> = ss.iter().filter_map(|s| s.temporal_cond_ttc_s).collect();
    let temporal_ss = temporal.iter().sum::<f64>() / temporal.len() as f64;
    let cond: Vec<f64> = ss.iter().filter_map(|s| s.cond_ttc_s).collect();
    let cond_ss = cond.iter().sum::<f64>() / cond.len() as f64;
    let t_hat = base.kinematics.t_hat_s;

    let el = start.elapsed();
    let pass = dips == 0
        && crossing.is_some_and(|r| r <= 10)
        && p_ss - baseline >= 0.15
        && temporal_ss >= t_hat - 0.05
        && within(el, 600);
    report(
        10,
        "post-attack recovery",
        pass,
        &format!(
            "σᵢ² = {:.4} s² (scale {:.3}), {dips} significant dips, crosses baseline after {:?} rounds, \
             steady p = {p_ss:.3} vs baseline {baseline:.3}, conditional TTC {cond_ss:.3} s, \
             temporal conditional TTC {temporal_ss:.3} s in {el:.1?}",
            res.delay_variance_s2, res.delay_scale, crossing
        ),
    );
}
