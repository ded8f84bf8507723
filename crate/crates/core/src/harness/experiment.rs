use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::numerics::{sample_normal, RandomStream};
use crate::risk::{branch_thresholds, ttc_with, TtcBreakpoints};
use crate::sync::{offset_step, DelaySource};

use super::{Design, ResolvedScenario, Scenario};

/// Conditional metrics with fewer conditioning events are reported as absent.
pub const MIN_CONDITIONING_EVENTS: usize = 30;

/// One simulated episode, slots `0..=horizon`.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    /// ξ^l (s).
    pub offsets: Vec<f64>,
    /// u^l driving l → l+1 (s); zero before the attack slot, where no delay is drawn.
    pub compensated: Vec<f64>,
    /// T_c(ξ^l) (s).
    pub ttc: Vec<f64>,
}

/// Simulates episode `index`; its random stream depends only on `(seed, index)`.
pub fn run_episode(resolved: &ResolvedScenario, index: u64) -> Result<Episode> {
    let bp = branch_thresholds(&resolved.scenario.kinematics)?;
    episode_with(resolved, resolved.delay_source(), &bp, index)
}

pub(crate) fn episode_with(
    resolved: &ResolvedScenario,
    source: &dyn DelaySource,
    bp: &TtcBreakpoints<f64>,
    index: u64,
) -> Result<Episode> {
    let sc = &resolved.scenario;
    let horizon = resolved.diffusion.horizon;
    let theta = resolved.diffusion.theta;
    let mu = resolved.diffusion.compensation_mean_s;
    let mut rng = RandomStream::new(sc.seed).substream(index).rng();

    let mut offsets = vec![0.0; horizon + 1];
    let mut compensated = vec![0.0; horizon];
    offsets[sc.attack_slot] =
        sample_normal(0.0, resolved.diffusion.initial_variance_s2.sqrt(), &mut rng)?;
    for l in sc.attack_slot..horizon {
        let u = source.sample_delay(&mut rng)? - mu;
        compensated[l] = u;
        offsets[l + 1] = match sc.design {
            Design::Resilient => offset_step(offsets[l], u, theta),
            Design::Reliable => -u,
        };
    }
    let ttc = offsets
        .iter()
        .map(|&xi| ttc_with(-xi.abs(), &sc.kinematics, bp))
        .collect();
    Ok(Episode {
        offsets,
        compensated,
        ttc,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlotMetrics {
    pub slot: usize,
    /// P(T_c(ξ^l) ≥ t̂).
    pub p: f64,
    /// 95% half-width of `p`.
    pub p_half_width: f64,
    /// E[T_c(ξ^l) | T_c(ξ^l) ≤ t̂] (s).
    pub cond_ttc_s: Option<f64>,
    /// E[T_c(ξ^{l+1}) | T_c(ξ^l) ≤ t̂] (s).
    pub temporal_cond_ttc_s: Option<f64>,
    /// Empirical E[(ξ^{l+1})² − ε̂² | (ξ^l)² > ε̂²] (s²).
    pub tcme_hat_s2: Option<f64>,
    pub tcme_half_width_s2: Option<f64>,
    /// Episodes with T_c(ξ^l) ≤ t̂.
    pub n_conditioning: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioMetrics {
    pub design: Design,
    pub episodes: usize,
    pub t_hat_s: f64,
    pub epsilon_hat_s: f64,
    pub delay_scale: f64,
    pub delay_mean_s: f64,
    pub delay_variance_s2: f64,
    pub slots: Vec<SlotMetrics>,
}

impl ScenarioMetrics {
    pub fn reliability(&self) -> Vec<f64> {
        self.slots.iter().map(|s| s.p).collect()
    }
}

/// Runs every episode in parallel and aggregates in episode order.
pub fn run_experiment(scenario: &Scenario) -> Result<ScenarioMetrics> {
    let resolved = scenario.resolve()?;
    run_resolved(&resolved, resolved.delay_source())
}

pub(crate) fn run_resolved(
    resolved: &ResolvedScenario,
    source: &dyn DelaySource,
) -> Result<ScenarioMetrics> {
    let sc = &resolved.scenario;
    let bp = branch_thresholds(&sc.kinematics)?;
    let episodes: Vec<Episode> = (0..sc.episodes as u64)
        .into_par_iter()
        .map(|i| episode_with(resolved, source, &bp, i))
        .collect::<Result<_>>()?;
    Ok(aggregate(resolved, &episodes))
}

fn mean_if_enough(sum: f64, n: usize) -> Option<f64> {
    (n >= MIN_CONDITIONING_EVENTS).then(|| sum / n as f64)
}

fn aggregate(resolved: &ResolvedScenario, episodes: &[Episode]) -> ScenarioMetrics {
    let sc = &resolved.scenario;
    let horizon = resolved.diffusion.horizon;
    let t_hat = sc.kinematics.t_hat_s;
    let eps = resolved.epsilon_hat_s * resolved.epsilon_hat_s;
    let n = episodes.len() as f64;
    let slots = (0..=horizon)
        .map(|l| {
            let (mut ok, mut k, mut sum_now, mut sum_next) = (0usize, 0usize, 0.0, 0.0);
            let (mut kt, mut s1, mut s2) = (0usize, 0.0, 0.0);
            for e in episodes {
                let t = e.ttc[l];
                if t >= t_hat {
                    ok += 1;
                }
                if t <= t_hat {
                    k += 1;
                    sum_now += t;
                    if l < horizon {
                        sum_next += e.ttc[l + 1];
                    }
                }
                if l < horizon && e.offsets[l] * e.offsets[l] > eps {
                    let v = e.offsets[l + 1] * e.offsets[l + 1] - eps;
                    kt += 1;
                    s1 += v;
                    s2 += v * v;
                }
            }
            let p = ok as f64 / n;
            let tcme = mean_if_enough(s1, kt);
            let tcme_hw = tcme.map(|m| {
                let kf = kt as f64;
                let var = ((s2 / kf - m * m) * kf / (kf - 1.0)).max(0.0);
                1.96 * (var / kf).sqrt()
            });
            SlotMetrics {
                slot: l,
                p,
                p_half_width: 1.96 * (p * (1.0 - p) / n).sqrt(),
                cond_ttc_s: mean_if_enough(sum_now, k),
                temporal_cond_ttc_s: if l < horizon {
                    mean_if_enough(sum_next, k)
                } else {
                    None
                },
                tcme_hat_s2: tcme,
                tcme_half_width_s2: tcme_hw,
                n_conditioning: k,
            }
        })
        .collect();
    ScenarioMetrics {
        design: sc.design,
        episodes: episodes.len(),
        t_hat_s: t_hat,
        epsilon_hat_s: resolved.epsilon_hat_s,
        delay_scale: resolved.channel.delay_scale,
        delay_mean_s: resolved.delay_mean_s,
        delay_variance_s2: resolved.delay_variance_s2,
        slots,
    }
}

/// Columns `slot, p, cond_ttc_s, temporal_cond_ttc_s, tcme_hat_s2, n_conditioning`;
/// absent metrics are empty cells.
pub fn write_metrics_csv<W: Write>(metrics: &ScenarioMetrics, out: W) -> Result<()> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "slot",
        "p",
        "cond_ttc_s",
        "temporal_cond_ttc_s",
        "tcme_hat_s2",
        "n_conditioning",
    ])?;
    for s in &metrics.slots {
        w.write_record([
            s.slot.to_string(),
            s.p.to_string(),
            opt(s.cond_ttc_s),
            opt(s.temporal_cond_ttc_s),
            opt(s.tcme_hat_s2),
            s.n_conditioning.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// JSON summary of a run: metrics, the scenario as given, and the build version.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub version: String,
    pub seed: u64,
    pub scenario: Scenario,
    pub compensation_mean_s: f64,
    pub metrics: ScenarioMetrics,
}

impl RunSummary {
    pub fn new(resolved: &ResolvedScenario, metrics: ScenarioMetrics, version: &str) -> Self {
        Self {
            version: version.to_string(),
            seed: resolved.scenario.seed,
            scenario: resolved.scenario.clone(),
            compensation_mean_s: resolved.diffusion.compensation_mean_s,
            metrics,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::DelayModel;
    use crate::resilience::tcme_closed_form;
    use crate::risk::ttc;
    use crate::sync::{offset_variance, ConstantDelay};

    fn small(design: Design, model: DelayModel, episodes: usize) -> Scenario {
        let mut s = Scenario::fig4().with_design(design);
        s.delay_model = model;
        s.episodes = episodes;
        s
    }

    #[test]
    fn zero_initial_variance_starts_synchronised() {
        let mut s = small(Design::Resilient, DelayModel::Channel, 200);
        s.diffusion.initial_variance_s2 = 0.0;
        let r = s.resolve().unwrap();
        let t0 = ttc(0.0, &s.kinematics).unwrap();
        let m = run_experiment(&s).unwrap();
        for i in 0..20 {
            let e = run_episode(&r, i).unwrap();
            for l in 0..=s.attack_slot {
                assert_eq!(e.offsets[l], 0.0);
                assert_eq!(e.ttc[l], t0);
            }
        }
        for l in 0..=s.attack_slot {
            assert_eq!(m.slots[l].p, 1.0);
            assert_eq!(m.slots[l].n_conditioning, 0);
            assert_eq!(m.slots[l].cond_ttc_s, None);
        }
    }

    #[test]
    fn noiseless_recovery_is_geometric() {
        let s = small(Design::Resilient, DelayModel::Channel, 1);
        let r = s.resolve().unwrap();
        let bp = branch_thresholds(&s.kinematics).unwrap();
        let source = ConstantDelay(r.diffusion.compensation_mean_s);
        for i in 0..50 {
            let e = episode_with(&r, &source, &bp, i).unwrap();
            let x0 = e.offsets[s.attack_slot];
            for l in s.attack_slot..=r.diffusion.horizon {
                let want = 0.45f64.powi((l - s.attack_slot) as i32) * x0.abs();
                assert!((e.offsets[l].abs() - want).abs() <= 1e-15 * x0.abs().max(1.0));
            }
        }
    }

    #[test]
    fn reliable_offsets_have_no_memory() {
        let s = small(Design::Reliable, DelayModel::Channel, 20_000);
        let r = s.resolve().unwrap();
        let eps: Vec<Episode> = (0..s.episodes as u64)
            .map(|i| run_episode(&r, i).unwrap())
            .collect();
        let n = eps.len() as f64;
        for l in (s.attack_slot + 1)..r.diffusion.horizon {
            let a: Vec<f64> = eps.iter().map(|e| e.offsets[l]).collect();
            let b: Vec<f64> = eps.iter().map(|e| e.offsets[l + 1]).collect();
            let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
            let cov = a
                .iter()
                .zip(&b)
                .map(|(x, y)| (x - ma) * (y - mb))
                .sum::<f64>()
                / n;
            let va = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / n;
            let vb = b.iter().map(|y| (y - mb).powi(2)).sum::<f64>() / n;
            let rho = cov / (va * vb).sqrt();
            assert!(rho.abs() < 3.0 / n.sqrt(), "slot {l}: {rho}");
        }
    }

    /// Wilson–Hilferty upper quantile of χ²_df at standard-normal level z.
    fn chi2_upper(df: f64, z: f64) -> f64 {
        let c = 2.0 / (9.0 * df);
        df * (1.0 - c + z * c.sqrt()).powi(3)
    }

    #[test]
    fn reliable_reliability_is_flat() {
        let s = small(Design::Reliable, DelayModel::Channel, 10_000);
        let m = run_experiment(&s).unwrap();
        let post = &m.slots[s.attack_slot + 1..];
        let n = m.episodes as f64;
        let pbar = post.iter().map(|x| x.p).sum::<f64>() / post.len() as f64;
        let chi2: f64 = post
            .iter()
            .map(|x| n * (x.p - pbar).powi(2) / (pbar * (1.0 - pbar)))
            .sum();
        let df = (post.len() - 1) as f64;
        assert!(chi2 < chi2_upper(df, 3.09), "χ² = {chi2}, df = {df}");
    }

    #[test]
    fn resilient_reliability_trends_up_and_beats_baseline() {
        let res = run_experiment(&small(Design::Resilient, DelayModel::Normal, 10_000)).unwrap();
        let rel = run_experiment(&small(Design::Reliable, DelayModel::Normal, 10_000)).unwrap();
        let start = 2;
        for w in res.slots[start..].windows(2) {
            let se = (w[0].p * (1.0 - w[0].p) * 2.0 / res.episodes as f64).sqrt();
            assert!(w[1].p >= w[0].p - 3.0 * se, "slot {}", w[1].slot);
        }
        let tail = |m: &ScenarioMetrics| m.slots[12..].iter().map(|s| s.p).sum::<f64>() / 9.0;
        let (a, b) = (tail(&res), tail(&rel));
        let se = (a * (1.0 - a) / 9e4 + b * (1.0 - b) / 9e4).sqrt();
        assert!(a - b > 3.0 * se, "{a} vs {b}");
    }

    #[test]
    fn tcme_hat_matches_closed_form_in_normal_regime() {
        let s = small(Design::Resilient, DelayModel::Normal, 100_000);
        let r = s.resolve().unwrap();
        let m = run_experiment(&s).unwrap();
        let si2 = r.delay_variance_s2;
        let eps = r.epsilon_hat_s * r.epsilon_hat_s;
        for l in 8..r.diffusion.horizon {
            let k = (l - s.attack_slot) as u32;
            let sl2 = offset_variance(k, 0.45, 9.0, si2);
            let want = tcme_closed_form(0.45, sl2.sqrt(), si2.sqrt(), eps).unwrap();
            let got = m.slots[l].tcme_hat_s2.unwrap();
            let hw = m.slots[l].tcme_half_width_s2.unwrap();
            assert!(
                (got - want).abs() < 2.0 * hw,
                "l={l}: {got} vs {want} ± {hw}"
            );
        }
    }

    #[test]
    fn half_width_shrinks_with_episodes() {
        let a = run_experiment(&small(Design::Reliable, DelayModel::Normal, 2_500)).unwrap();
        let b = run_experiment(&small(Design::Reliable, DelayModel::Normal, 10_000)).unwrap();
        let l = 10;
        let ratio = a.slots[l].p_half_width / b.slots[l].p_half_width;
        assert!((ratio / 2.0 - 1.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn identical_across_thread_counts() {
        let s = small(Design::Resilient, DelayModel::Channel, 3_000);
        let csv_with = |threads| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let m = pool.install(|| run_experiment(&s)).unwrap();
            let mut buf = Vec::new();
            write_metrics_csv(&m, &mut buf).unwrap();
            buf
        };
        let one = csv_with(1);
        assert_eq!(one, csv_with(4));
        assert_eq!(one, csv_with(3));
        let text = String::from_utf8(one).unwrap();
        assert!(
            text.starts_with("slot,p,cond_ttc_s,temporal_cond_ttc_s,tcme_hat_s2,n_conditioning\n")
        );
        assert_eq!(text.lines().count(), 22);
    }

    #[test]
    fn conditional_cells_absent_when_starved() {
        let m = run_experiment(&small(Design::Resilient, DelayModel::Channel, 50)).unwrap();
        for s in &m.slots {
            if s.n_conditioning < MIN_CONDITIONING_EVENTS {
                assert!(s.cond_ttc_s.is_none() && s.temporal_cond_ttc_s.is_none());
            }
            assert!((0.0..=1.0).contains(&s.p));
        }
        assert!(m.slots.last().unwrap().temporal_cond_ttc_s.is_none());
    }
}
