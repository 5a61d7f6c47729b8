//! `sgp-lab`: stability analysis, phase portraits, trajectories and 2D GAN
//! training for simple-gradient-penalty GANs.
//!
//! Exit status: 0 on success, 2 on invalid input or I/O errors, 3 when a
//! computation hits a non-finite value.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use sgp_core::analytic::ToyKind;
use sgp_core::gan2d::{DatasetKind, Optimizer, TrainConfig};
use sgp_core::measure::{MassProfile, MeasureSpec, PenaltyKind};
use sgp_core::problems::{ProblemSpec, ToySpec};

use config::{default_mc_n, CommandKind, Method, Options, RunConfig};

/// Worker threads for sweeps and data-parallel kernels.
const WORKERS_VAR: &str = "SGP_WORKERS";

#[derive(Parser)]
#[command(name = "sgp-lab", version, about = "Dynamics of GANs trained with a simple gradient penalty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Jacobian spectrum, Q/R blocks and projected spectrum at a point.
    Analyze {
        #[command(flatten)]
        toy: ToyArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Vector field, nullclines and sample trajectories of a toy system.
    Portrait {
        #[command(flatten)]
        toy: ToyArgs,
        /// psi_min,psi_max,theta_min,theta_max
        #[arg(long = "box", value_parser = parse_box, allow_hyphen_values = true)]
        bounds: Option<[f64; 4]>,
        /// Lattice points per axis.
        #[arg(long)]
        resolution: Option<usize>,
        /// Trajectory start psi,theta (repeatable).
        #[arg(long = "start", value_parser = parse_pair, allow_hyphen_values = true)]
        starts: Vec<[f64; 2]>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        t_max: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// One trajectory by RK4 or simultaneous gradient descent.
    Integrate {
        #[command(flatten)]
        toy: ToyArgs,
        /// Start psi,theta.
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        start: Option<[f64; 2]>,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        t_max: Option<f64>,
        /// Step size for --method gd.
        #[arg(long)]
        lr: Option<f64>,
        /// Step count for --method gd.
        #[arg(long)]
        steps: Option<usize>,
        /// Stop once within 1e-4 of the problem point.
        #[arg(long)]
        stop_at_point: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Train 2D GANs, one run per seed, each in its own directory.
    Train2d {
        /// gauss8, gauss25 or swissroll.
        #[arg(long)]
        dataset: Option<DatasetKind>,
        /// Penalty measure: pg, pd, gp, mid or g_anc.
        #[arg(long)]
        penalty_kind: Option<PenaltyKind>,
        /// Penalty weight.
        #[arg(long)]
        rho: Option<f64>,
        /// Step size.
        #[arg(long)]
        lr: Option<f64>,
        /// Iterations per run.
        #[arg(long)]
        iters: Option<usize>,
        /// Samples per batch.
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long, value_enum)]
        optimizer: Option<OptimizerArg>,
        /// Comma-separated seeds; defaults to --seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Machine-checkable assumptions at a point.
    CheckAssumptions {
        #[command(flatten)]
        toy: ToyArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Execute a JSON run configuration; flags override its values.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    /// Monte-Carlo samples per estimate.
    #[arg(long)]
    mc_n: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ToyArgs {
    /// dirac, quadratic or quadratic-dirac.
    #[arg(long)]
    system: ToyKind,
    /// Penalty weight.
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    /// Dirac GAN penalty mass: const:C, bump:R2, psi2 or gauss:C.
    #[arg(long)]
    mass: Option<MassProfile>,
    /// Quadratic GAN penalty as a JSON measure spec.
    #[arg(long)]
    penalty: Option<String>,
    /// Point psi,theta to analyze (defaults to the canonical equilibrium).
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    at: Option<[f64; 2]>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum MethodArg {
    Ode,
    Gd,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum OptimizerArg {
    Gd,
    Adam,
}

fn parse_floats<const N: usize>(s: &str) -> std::result::Result<[f64; N], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected {N} comma-separated numbers, got {}", v.len()))
}

fn parse_pair(s: &str) -> std::result::Result<[f64; 2], String> {
    parse_floats::<2>(s)
}

fn parse_box(s: &str) -> std::result::Result<[f64; 4], String> {
    parse_floats::<4>(s)
}

impl ToyArgs {
    fn spec(&self) -> Result<ProblemSpec> {
        let mut t = ToySpec::new(self.system, self.rho);
        if let Some(m) = self.mass {
            t.mass = m;
        }
        if let Some(p) = &self.penalty {
            let spec: MeasureSpec = serde_json::from_str(p).context("--penalty is not a valid measure spec")?;
            t.penalty = Some(spec);
        }
        t.at = self.at;
        Ok(ProblemSpec::Toy(t))
    }
}

impl Common {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
            if let ProblemSpec::Gan2d(g) = &mut cfg.problem {
                g.seed = s;
            }
        }
        if let Some(n) = self.mc_n {
            cfg.mc_n = n;
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
    }
}

fn base(command: CommandKind, problem: ProblemSpec) -> RunConfig {
    RunConfig { command, problem, seed: 0, mc_n: default_mc_n(), out: None, options: Options::default() }
}

fn build(cli: Cli) -> Result<RunConfig> {
    let (mut cfg, common) = match cli.command {
        Command::Analyze { toy, common } => (base(CommandKind::Analyze, toy.spec()?), common),
        Command::CheckAssumptions { toy, common } => (base(CommandKind::CheckAssumptions, toy.spec()?), common),
        Command::Portrait { toy, bounds, resolution, starts, dt, t_max, common } => {
            let mut c = base(CommandKind::Portrait, toy.spec()?);
            let o = &mut c.options;
            o.bounds = bounds;
            o.starts = starts;
            o.resolution = resolution.unwrap_or(o.resolution);
            o.dt = dt.unwrap_or(o.dt);
            o.t_max = t_max.unwrap_or(o.t_max);
            (c, common)
        }
        Command::Integrate { toy, start, method, dt, t_max, lr, steps, stop_at_point, common } => {
            let mut c = base(CommandKind::Integrate, toy.spec()?);
            let o = &mut c.options;
            o.start = start;
            if let Some(m) = method {
                o.method = match m {
                    MethodArg::Ode => Method::Ode,
                    MethodArg::Gd => Method::Gd,
                };
            }
            o.dt = dt.unwrap_or(o.dt);
            o.t_max = t_max.unwrap_or(o.t_max);
            o.lr = lr.unwrap_or(o.lr);
            o.steps = steps.unwrap_or(o.steps);
            o.stop_at_point = stop_at_point;
            (c, common)
        }
        Command::Train2d { dataset, penalty_kind, rho, lr, iters, batch, optimizer, seeds, common } => {
            let mut t = TrainConfig::default();
            if let Some(d) = dataset {
                t.dataset = d;
            }
            if let Some(k) = penalty_kind {
                t.penalty_kind = k;
            }
            t.rho = rho.unwrap_or(t.rho);
            t.lr = lr.unwrap_or(t.lr);
            t.iters = iters.unwrap_or(t.iters);
            t.batch = batch.unwrap_or(t.batch);
            if let Some(o) = optimizer {
                t.optimizer = match o {
                    OptimizerArg::Gd => Optimizer::Gd,
                    OptimizerArg::Adam => Optimizer::adam(),
                };
            }
            let mut c = base(CommandKind::Train2d, ProblemSpec::Gan2d(t));
            c.options.seeds = seeds;
            (c, common)
        }
        Command::Run { config, common } => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("cannot read {}", config.display()))?;
            let c: RunConfig = serde_json::from_str(&text).with_context(|| format!("invalid config {}", config.display()))?;
            (c, common)
        }
    };
    common.apply(&mut cfg);
    Ok(cfg)
}

fn configure_workers() -> Result<()> {
    let Ok(v) = std::env::var(WORKERS_VAR) else { return Ok(()) };
    let n: usize = v.trim().parse().with_context(|| format!("{WORKERS_VAR} must be a positive integer, got `{v}`"))?;
    anyhow::ensure!(n > 0, "{WORKERS_VAR} must be a positive integer, got `{v}`");
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("cannot configure the worker pool")?;
    Ok(())
}

/// Numerical failures exit with 3, everything else with 2.
fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<sgp_core::Error>() {
        Some(sgp_core::Error::NumericalFailure { .. }) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            eprintln!("sgp-lab: {}", msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    let result = configure_workers().and_then(|_| build(cli)).and_then(run::execute);
    match result {
        Ok(outcome) => {
            if let Some(s) = outcome.stdout {
                print!("{s}");
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("sgp-lab: {msg}");
            ExitCode::from(exit_code(&e))
        }
    }
}
