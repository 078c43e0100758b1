//! Subcommands behind the `pdmp` binary.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::Rng;

use pdmp_core::estimators::{estimate_density, visits, EstimatorConfig, Kernel, PartitionSpec};
use pdmp_core::io::{read_trajectory, write_estimate, write_trajectory, ModelKind, RunConfig};
use pdmp_core::oracle::{self, OracleConfig};
use pdmp_core::simulator::chain_rng;
use pdmp_core::{build_bench_model, simulate_chain, BenchParams, Error, IntervalModel, Model, Region, State};

#[derive(Debug, Parser)]
#[command(name = "pdmp", version, about = "Simulate PDMP trajectories and estimate sojourn-time densities")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the embedded chain and write a trajectory file.
    Simulate(Flags),
    /// Estimate the sojourn density in A from a trajectory file.
    Estimate(Flags),
    /// Run the numerical identity checks for a model.
    Oracle(Flags),
}

/// Flags override values read from `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// key=value file with defaults for any of the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// bench or interval.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub n_jumps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Constant part of the jump rate.
    #[arg(long)]
    pub base_rate: Option<f64>,
    /// Bandwidth exponent: b = h^(-alpha).
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub r1: Option<f64>,
    #[arg(long)]
    pub r2: Option<f64>,
    /// Number of output grid points on [r1, r2].
    #[arg(long)]
    pub grid: Option<usize>,
    /// Trajectory file to read.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Add the exact density column (bench model only).
    #[arg(long)]
    pub truth: bool,
}

/// Failure of a command, split by exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad invocation: exit code 2.
    Usage(String),
    /// Validation error or failed check: exit code 1.
    Invalid(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Invalid(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Invalid(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

pub type Outcome = std::result::Result<String, Failure>;

/// Resolves the run configuration: defaults, then the config file, then flags.
pub fn resolve(flags: &Flags) -> std::result::Result<RunConfig, Failure> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &flags.config {
        cfg.apply_file(path).map_err(|e| Failure::Usage(e.to_string()))?;
    }
    let mut set = |key: &str, value: Option<String>| -> std::result::Result<(), Failure> {
        match value {
            Some(v) => cfg.set(key, &v).map_err(|e| Failure::Usage(e.to_string())),
            None => Ok(()),
        }
    };
    set("model", flags.model.clone())?;
    set("n_jumps", flags.n_jumps.map(|v| v.to_string()))?;
    set("seed", flags.seed.map(|v| v.to_string()))?;
    set("sigma2", flags.sigma2.map(|v| v.to_string()))?;
    set("epsilon", flags.epsilon.map(|v| v.to_string()))?;
    set("base_rate", flags.base_rate.map(|v| v.to_string()))?;
    set("alpha", flags.alpha.map(|v| v.to_string()))?;
    set("horizon", flags.horizon.map(|v| v.to_string()))?;
    set("r1", flags.r1.map(|v| v.to_string()))?;
    set("r2", flags.r2.map(|v| v.to_string()))?;
    set("grid", flags.grid.map(|v| v.to_string()))?;
    set("input", flags.input.as_ref().map(|p| p.display().to_string()))?;
    set("out", flags.out.as_ref().map(|p| p.display().to_string()))?;
    if flags.truth {
        cfg.truth = true;
    }
    Ok(cfg)
}

/// A configured model with its region `A`, the target partition, and the
/// start state used for simulation.
pub struct Setup {
    pub model: Box<dyn Model>,
    pub region: Region,
    pub partition: PartitionSpec,
    pub start: State,
    pub bench: bool,
}

pub fn setup(cfg: &RunConfig) -> std::result::Result<Setup, Failure> {
    match cfg.model {
        ModelKind::Bench => {
            let m = build_bench_model(BenchParams {
                sigma2: cfg.sigma2,
                base_rate: cfg.base_rate,
                epsilon: cfg.epsilon,
                ..BenchParams::default()
            })?;
            Ok(Setup {
                region: m.region_a(),
                partition: m.partition(),
                start: vec![0.0, 0.0, std::f64::consts::PI],
                model: Box::new(m),
                bench: true,
            })
        }
        ModelKind::Interval => {
            if !(cfg.base_rate >= 0.0 && cfg.base_rate.is_finite()) {
                return Err(Failure::Invalid(format!(
                    "base_rate must be nonnegative, got {}",
                    cfg.base_rate
                )));
            }
            let universe = Region::open_box("D", &[0.0], &[1.0]);
            let a = Region::open_box("A", &[0.0], &[0.5]).with_exit_time_bound(0.5);
            let rest = a.complement_within("D\\A", &universe);
            Ok(Setup {
                model: Box::new(IntervalModel::new(cfg.base_rate, 0.0)),
                partition: PartitionSpec::new(vec![a.clone(), rest]),
                region: a,
                start: vec![0.5],
                bench: false,
            })
        }
    }
}

pub fn cmd_simulate(cfg: &RunConfig) -> Outcome {
    let out = cfg
        .out
        .as_ref()
        .ok_or_else(|| Failure::Usage("simulate needs --out".into()))?;
    if cfg.n_jumps == 0 {
        return Err(Failure::Usage("--n-jumps must be at least 1".into()));
    }
    let s = setup(cfg)?;
    let traj = simulate_chain(s.model.as_ref(), &s.start, cfg.n_jumps, cfg.seed)?;
    write_trajectory(&traj, out)?;

    let n = traj.n_transitions();
    let forced = traj.records().iter().filter(|r| r.forced).count();
    let mut summary = String::new();
    writeln!(summary, "model: {}", s.model.name()).unwrap();
    writeln!(summary, "seed: {}", cfg.seed).unwrap();
    writeln!(summary, "jumps: {n} ({forced} forced)").unwrap();
    for cell in s.partition.cells() {
        let k = traj.records()[1..].iter().filter(|r| cell.contains(&r.z)).count();
        writeln!(
            summary,
            "visits to {}: {k} (fraction {:.4})",
            cell.label(),
            k as f64 / n as f64
        )
        .unwrap();
    }
    writeln!(summary, "wrote {}", out.display()).unwrap();
    Ok(summary)
}

pub fn cmd_estimate(cfg: &RunConfig) -> Outcome {
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| Failure::Usage("estimate needs --input".into()))?;
    let out = cfg
        .out
        .as_ref()
        .ok_or_else(|| Failure::Usage("estimate needs --out".into()))?;
    let s = setup(cfg)?;
    if cfg.truth && !s.bench {
        return Err(Failure::Usage("--truth is only available for the bench model".into()));
    }
    let traj = read_trajectory(input)?;
    traj.validate(s.model.as_ref())?;
    let est_cfg = EstimatorConfig {
        kernel: Kernel::Epanechnikov,
        alpha: cfg.alpha,
        horizon_t: cfg.horizon,
        window: (cfg.r1, cfg.r2),
        grid_points: cfg.grid,
    };
    let est = estimate_density(&traj, &s.region, &s.partition, &est_cfg)?;
    let truth: Option<Vec<f64>> = cfg
        .truth
        .then(|| est.grid.iter().map(|&t| oracle::bench_exact_f(t)).collect());
    write_estimate(out, &est.grid, &est.values, truth.as_deref())?;

    let mut summary = String::new();
    writeln!(
        summary,
        "transitions: {}, visits to {}: {}",
        est.meta.n_transitions,
        est.meta.region,
        visits(&traj, &s.region)
    )
    .unwrap();
    for c in &est.meta.cells {
        match c.bandwidth {
            Some(b) => writeln!(summary, "cell {}: {} transitions, bandwidth {b:.6}", c.label, c.matched),
            None => writeln!(summary, "cell {}: no transitions, estimator undefined (contributes 0)", c.label),
        }
        .unwrap();
    }
    writeln!(summary, "wrote {} grid points to {}", est.grid.len(), out.display()).unwrap();
    Ok(summary)
}

/// Random interior states for the identity checks.
fn check_states(setup: &Setup, count: usize, seed: u64) -> Vec<State> {
    let mut rng = chain_rng(seed, 11);
    (0..count)
        .map(|_| {
            if setup.bench {
                let r = 0.95 * rng.random::<f64>().sqrt();
                let phi = std::f64::consts::TAU * rng.random::<f64>();
                let theta = std::f64::consts::TAU * (1.0 - rng.random::<f64>());
                vec![r * phi.cos(), r * phi.sin(), theta.min(std::f64::consts::TAU - 1e-9)]
            } else {
                vec![0.01 + 0.98 * rng.random::<f64>()]
            }
        })
        .collect()
}

pub fn cmd_oracle(cfg: &RunConfig) -> Outcome {
    let s = setup(cfg)?;
    let ocfg = OracleConfig {
        seed: cfg.seed,
        ..OracleConfig::default()
    };
    let states = check_states(&s, 20, cfg.seed);
    let mut rng = chain_rng(cfg.seed, 12);
    let triples = oracle::random_triples(s.model.as_ref(), &states, 100, &mut rng)?;
    let mut report = oracle::run_invariant_suite(s.model.as_ref(), &states, &triples, &ocfg)?;
    if s.bench {
        report.checks.push(oracle::Check::new(
            "sojourn density from the origin matches closed form",
            oracle::bench_exact_residual(s.model.as_ref(), 200)?,
            1e-10,
        ));
    }
    let text = format!("model: {}\n{report}", report.model);
    if report.passed() {
        Ok(text + "all checks passed\n")
    } else {
        Err(Failure::Invalid(text + "some checks failed\n"))
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => return Ok(e.to_string()),
        Err(e) => return Err(Failure::Usage(e.to_string())),
    };
    match &cli.command {
        Command::Simulate(f) => cmd_simulate(&resolve(f)?),
        Command::Estimate(f) => cmd_estimate(&resolve(f)?),
        Command::Oracle(f) => cmd_oracle(&resolve(f)?),
    }
}
