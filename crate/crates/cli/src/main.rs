use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use platoon_core::channel::{
    delay_moments_montecarlo, delay_moments_quadrature_with, CdfForm, MomentOptions,
};
use platoon_core::harness::{
    run_experiment, validate_suite, write_metrics_csv, Design, RunSummary, Scenario,
};
use platoon_core::numerics::RandomStream;
use platoon_core::resilience::{
    optimize_theta, resilient_feasible_region, write_region_csv, EvaluationSlot, RegionSpec,
    DEFAULT_THETA_RESOLUTION,
};
use platoon_core::risk::{breakpoints_for, epsilon_hat, ttc};
use platoon_core::Error;

const VERSION: &str = env!("PLATOON_GIT_DESCRIBE");

#[derive(Parser)]
#[command(name = "platoon", version = VERSION, about = "Clock-offset resilience experiments for V2V platoons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Scenario JSON; defaults to the preset.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Preset::TableOne)]
    preset: Preset,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    TableOne,
    Fig4,
}

#[derive(Clone, Copy, ValueEnum)]
enum DesignArg {
    Resilient,
    Reliable,
}

#[derive(Subcommand)]
enum Command {
    /// Delay mean and variance by quadrature and by Monte Carlo.
    Moments {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Fix the desired-link fading gain to 1.
        #[arg(long)]
        pin_fading: bool,
        /// Use the Alzer CDF approximation in the quadrature.
        #[arg(long)]
        alzer: bool,
    },
    /// Feasible-region sweep over (t̂, σᵢ²) written as CSV.
    Region {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 3.0)]
        t_hat_min: f64,
        #[arg(long, default_value_t = 4.5)]
        t_hat_max: f64,
        #[arg(long, default_value_t = 16)]
        t_hat_steps: usize,
        #[arg(long, default_value_t = 0.02)]
        sigma_sq_max: f64,
        #[arg(long, default_value_t = 41)]
        sigma_sq_steps: usize,
        #[arg(long, default_value_t = DEFAULT_THETA_RESOLUTION)]
        resolution: usize,
        /// Test σ_l² at this slot instead of the steady state.
        #[arg(long)]
        slot: Option<u32>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Post-attack recovery experiment: per-slot CSV and JSON summary.
    Recover {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_enum)]
        design: Option<DesignArg>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// TTC breakpoints and the offset tolerance ε̂.
    Ttc {
        #[command(flatten)]
        config: ConfigArgs,
        /// Overrides `kinematics.t_hat_s`.
        #[arg(long)]
        t_hat: Option<f64>,
    },
    /// Diffusion factor minimising the recovery bound.
    Optimize {
        #[command(flatten)]
        config: ConfigArgs,
        /// Offset tolerance; derived from t̂ when absent.
        #[arg(long)]
        epsilon_hat: Option<f64>,
        #[arg(long)]
        sigma_i_sq: f64,
        /// Overrides `diffusion.initial_variance_s2`.
        #[arg(long)]
        sigma0_sq: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_THETA_RESOLUTION)]
        resolution: usize,
    },
    /// Oracle self-check; exits 3 if any check fails.
    Validate {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

enum Failure {
    Config(String),
    Numeric(String),
    Validation(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Config(e.to_string()),
            Error::Io(_) => Failure::Config(e.to_string()),
            _ => Failure::Numeric(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Config(format!("i/o: {e}"))
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Numeric(format!("json: {e}"))
    }
}

fn load(args: &ConfigArgs) -> Result<Scenario, Failure> {
    let scenario = match &args.config {
        None => match args.preset {
            Preset::TableOne => Scenario::table_one(),
            Preset::Fig4 => Scenario::fig4(),
        },
        Some(path) => parse_config(path)?,
    };
    scenario.validate()?;
    Ok(scenario)
}

fn parse_config(path: &Path) -> Result<Scenario, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        Failure::Config(format!("{}: at `{key}`: {}", path.display(), e.inner()))
    })
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

#[derive(Serialize)]
struct MomentsReport {
    quadrature: platoon_core::channel::DelayStats,
    monte_carlo: platoon_core::channel::DelayStats,
    mean_s: f64,
    sigma_i_sq_s2: f64,
    mean_relative_diff: f64,
    variance_relative_diff: f64,
}

fn relative(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Moments {
            config,
            samples,
            seed,
            pin_fading,
            alzer,
        } => {
            let sc = load(&config)?;
            let mut ch = sc.resolve()?.channel;
            ch.pin_fading = pin_fading;
            let opts = MomentOptions {
                cdf: if alzer {
                    CdfForm::Alzer
                } else {
                    CdfForm::Exact
                },
                ..Default::default()
            };
            let q = delay_moments_quadrature_with(&ch, &opts)?;
            let mc =
                delay_moments_montecarlo(&ch, samples, RandomStream::new(seed.unwrap_or(sc.seed)))?;
            print_json(&MomentsReport {
                mean_s: q.mean_s,
                sigma_i_sq_s2: q.variance_s2,
                mean_relative_diff: relative(q.mean_s, mc.mean_s),
                variance_relative_diff: relative(q.variance_s2, mc.variance_s2),
                quadrature: q,
                monte_carlo: mc,
            })
        }
        Command::Region {
            config,
            t_hat_min,
            t_hat_max,
            t_hat_steps,
            sigma_sq_max,
            sigma_sq_steps,
            resolution,
            slot,
            output,
        } => {
            let sc = load(&config)?;
            if t_hat_steps < 1
                || sigma_sq_steps < 1
                || !(t_hat_max >= t_hat_min)
                || !(sigma_sq_max >= 0.0)
            {
                return Err(Failure::Config("empty or inverted sweep range".into()));
            }
            let grid = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
                if n == 1 {
                    return vec![lo];
                }
                (0..n)
                    .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
                    .collect()
            };
            let spec = RegionSpec {
                t_hats: grid(t_hat_min, t_hat_max, t_hat_steps),
                sigma_i_sq: grid(0.0, sigma_sq_max, sigma_sq_steps),
                sigma0_sq: sc.diffusion.initial_variance_s2,
                kinematics: sc.kinematics,
                theta_resolution: resolution,
                evaluation: slot.map_or(EvaluationSlot::SteadyState, EvaluationSlot::Slot),
            };
            let points = resilient_feasible_region(&spec)?;
            write_region_csv(&points, sink(output.as_deref())?)?;
            Ok(())
        }
        Command::Recover {
            config,
            design,
            episodes,
            seed,
            output,
            summary,
        } => {
            let mut sc = load(&config)?;
            if let Some(d) = design {
                sc.design = match d {
                    DesignArg::Resilient => Design::Resilient,
                    DesignArg::Reliable => Design::Reliable,
                };
            }
            if let Some(n) = episodes {
                sc.episodes = n;
            }
            if let Some(s) = seed {
                sc.seed = s;
            }
            let resolved = sc.resolve()?;
            let metrics = run_experiment(&sc)?;
            write_metrics_csv(&metrics, sink(output.as_deref())?)?;
            if let Some(path) = summary {
                let s = RunSummary::new(&resolved, metrics, VERSION);
                let mut w = BufWriter::new(File::create(path)?);
                serde_json::to_writer_pretty(&mut w, &s)?;
                writeln!(w)?;
            }
            Ok(())
        }
        Command::Ttc { config, t_hat } => {
            let sc = load(&config)?;
            let mut k = sc.kinematics;
            if let Some(t) = t_hat {
                k.t_hat_s = t;
            }
            let bp = breakpoints_for(k.t_hat_s, &k)?;
            #[derive(Serialize)]
            struct Report {
                t_hat_s: f64,
                t1_s: f64,
                t2_s: f64,
                ttc_zero_s: f64,
                ttc_floor_s: f64,
                epsilon_hat_s: f64,
            }
            print_json(&Report {
                t_hat_s: k.t_hat_s,
                t1_s: bp.t1,
                t2_s: bp.t2,
                ttc_zero_s: ttc(0.0, &k)?,
                ttc_floor_s: k.ttc_floor(),
                epsilon_hat_s: bp.epsilon_hat.unwrap_or(f64::NAN),
            })
        }
        Command::Optimize {
            config,
            epsilon_hat: eh,
            sigma_i_sq,
            sigma0_sq,
            resolution,
        } => {
            let sc = load(&config)?;
            let eh = match eh {
                Some(e) => e,
                None => epsilon_hat(sc.kinematics.t_hat_s, &sc.kinematics)?,
            };
            let s0 = sigma0_sq.unwrap_or(sc.diffusion.initial_variance_s2);
            #[derive(Serialize)]
            struct Report {
                epsilon_hat_s: f64,
                sigma_i_sq_s2: f64,
                sigma0_sq_s2: f64,
                #[serde(flatten)]
                result: platoon_core::resilience::FeasibilityResult,
            }
            print_json(&Report {
                epsilon_hat_s: eh,
                sigma_i_sq_s2: sigma_i_sq,
                sigma0_sq_s2: s0,
                result: optimize_theta(eh, sigma_i_sq, s0, resolution)?,
            })
        }
        Command::Validate { config } => {
            let sc = load(&config)?;
            let checks = validate_suite(&sc)?;
            let mut out = io::stdout().lock();
            let mut failed = 0;
            for c in &checks {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                writeln!(out, "{tag} {}: {}", c.name, c.detail)?;
                failed += usize::from(!c.passed);
            }
            if failed > 0 {
                return Err(Failure::Validation(format!(
                    "{failed} of {} checks failed",
                    checks.len()
                )));
            }
            writeln!(out, "all {} checks passed", checks.len())?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("numeric failure: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Validation(msg)) => {
            eprintln!("validation failed: {msg}");
            ExitCode::from(3)
        }
    }
}
