//! Command execution. Every command validates its configuration before it
//! touches the filesystem, then writes `manifest.json` and its artifacts
//! into the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sgp_core::dynamics::{check_assumptions, AssumptionConfig, McConfig};
use sgp_core::gan2d::{train, OutputDir, Setup, TrainConfig};
use sgp_core::integrate::{integrate_ode, phase_portrait, simultaneous_gd, PortraitConfig, StopRule, TerminalReason};
use sgp_core::problems::{drift_csv, ProblemSpec, ToySpec};
use sgp_core::stability::{analyze, projected_spectrum, qr_blocks, BlockReport, SpectralReport};

use crate::config::{CommandKind, Method, RunConfig};

/// What a finished command hands back to `main`.
pub struct Outcome {
    /// Printed on stdout.
    pub stdout: Option<String>,
    /// Non-zero when the run completed but hit a numerical failure.
    pub exit_code: i32,
}

impl Outcome {
    fn ok(stdout: Option<String>) -> Self {
        Outcome { stdout, exit_code: 0 }
    }
}

#[derive(Serialize)]
struct Projected<'a> {
    report: Option<&'a SpectralReport>,
    error: Option<String>,
}

#[derive(Serialize)]
struct SeedSummary {
    seed: u64,
    dir: String,
    final_iter: usize,
    wgan_loss: f64,
    mode_coverage: Option<usize>,
    high_quality_fraction: Option<f64>,
    error: Option<String>,
}

pub fn execute(cfg: RunConfig) -> Result<Outcome> {
    let cfg = cfg.resolve()?;
    let out = cfg.out.clone().expect("resolved configs carry an output directory");
    fs::create_dir_all(&out).with_context(|| format!("cannot create output directory {}", out.display()))?;
    write(&out, "manifest.json", &pretty(&cfg)?)?;
    match cfg.command {
        CommandKind::Analyze => run_analyze(&cfg, &out),
        CommandKind::Portrait => run_portrait(&cfg, &out),
        CommandKind::Integrate => run_integrate(&cfg, &out),
        CommandKind::Train2d => run_train(&cfg, &out),
        CommandKind::CheckAssumptions => run_assumptions(&cfg, &out),
    }
}

fn pretty<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))
}

/// Parameters at which a problem is analyzed: the toy point, or the
/// initialization of a 2D GAN.
fn problem_point(cfg: &RunConfig) -> Result<(sgp_core::dynamics::SgpProblem, Vec<f64>, Vec<f64>)> {
    match &cfg.problem {
        ProblemSpec::Toy(t) => {
            let p = t.point();
            Ok((t.sgp_problem()?, vec![p[0]], vec![p[1]]))
        }
        ProblemSpec::Gan2d(g) => {
            let setup = Setup::new(g)?;
            let (psi, theta) = setup.init(g.seed);
            Ok((setup.problem, psi, theta))
        }
    }
}

fn rho_of(cfg: &RunConfig) -> f64 {
    match &cfg.problem {
        ProblemSpec::Toy(t) => t.rho,
        ProblemSpec::Gan2d(g) => g.rho,
    }
}

fn run_analyze(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let (problem, psi, theta) = problem_point(cfg)?;
    let blocks: BlockReport = qr_blocks(&problem, &psi, &theta, McConfig::new(cfg.mc_n, cfg.seed))?;
    let spectrum = match &cfg.problem {
        ProblemSpec::Toy(t) => analyze(t.field(cfg.mc_n)?.as_ref(), &t.point(), cfg.seed)?,
        ProblemSpec::Gan2d(_) => blocks.jacobian.clone().expect("block analysis carries its Jacobian"),
    };
    let projected = projected_spectrum(&blocks, rho_of(cfg));
    let projected = match &projected {
        Ok(r) => Projected { report: Some(r), error: None },
        Err(e) => Projected { report: None, error: Some(e.to_string()) },
    };
    let spectrum_json = pretty(&spectrum)?;
    write(out, "spectrum.json", &spectrum_json)?;
    write(out, "jacobian.csv", &spectrum.jacobian_csv())?;
    write(out, "blocks.json", &pretty(&blocks)?)?;
    write(out, "projected.json", &pretty(&projected)?)?;
    if let ProblemSpec::Toy(t) = &cfg.problem {
        let at = t.point();
        write(out, "drift.csv", &drift_csv(t.field(cfg.mc_n)?.as_ref(), &["psi", "theta"], &[at.to_vec()], cfg.seed)?)?;
    }
    Ok(Outcome::ok(Some(spectrum_json)))
}

fn run_portrait(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let toy = cfg.toy()?;
    let o = &cfg.options;
    let b = o.bounds.expect("resolved portrait configs carry a box");
    let mut pc = PortraitConfig::new((b[0], b[1]), (b[2], b[3]), o.resolution);
    pc.starts = o.starts.clone();
    pc.dt = o.dt;
    pc.t_max = o.t_max;
    pc.seed = cfg.seed;
    if toy.penalty.is_none() {
        pc.known_equilibria = toy.system()?.equilibria.iter().map(|&(a, b)| [a, b]).collect();
    }
    let portrait = phase_portrait(toy.field(cfg.mc_n)?.as_ref(), &pc)?;
    write(out, "portrait.json", &pretty(&portrait)?)?;
    write(out, "portrait.svg", &portrait.to_svg(&title(toy)))?;
    write(out, "field.csv", &portrait.field_csv())?;
    Ok(Outcome::ok(None))
}

fn title(t: &ToySpec) -> String {
    let mut s = format!("{} GAN, rho = {}", t.system, t.rho);
    if t.system == sgp_core::analytic::ToyKind::Dirac {
        s.push_str(&format!(", M = {}", t.mass));
    }
    if let Some(p) = &t.penalty {
        s.push_str(&format!(", penalty {}", p.kind));
    }
    s
}

fn run_integrate(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let toy = cfg.toy()?;
    let o = &cfg.options;
    let field = toy.field(cfg.mc_n)?;
    let start = o.start.expect("resolved integrate configs carry a start");
    let stop = o.stop_at_point.then(|| StopRule::new(toy.point().to_vec()));
    let traj = match o.method {
        Method::Ode => integrate_ode(field.as_ref(), &start, o.dt, o.t_max, stop.as_ref(), cfg.seed)?,
        Method::Gd => simultaneous_gd(field.as_ref(), &start, o.lr, o.steps, stop.as_ref(), cfg.seed)?,
    };
    write(out, "trajectory.csv", &traj.to_csv(&["psi", "theta"]))?;
    let summary = serde_json::json!({
        "terminal_reason": traj.terminal_reason,
        "final_time": traj.final_time(),
        "final_state": traj.last(),
        "steps": traj.states.len() - 1,
    });
    let summary = pretty(&summary)?;
    write(out, "summary.json", &summary)?;
    let exit_code = if traj.terminal_reason == TerminalReason::NumericalFailure { 3 } else { 0 };
    Ok(Outcome { stdout: Some(summary), exit_code })
}

fn run_train(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let ProblemSpec::Gan2d(base) = &cfg.problem else { unreachable!("resolve rejects toy problems for train2d") };
    let runs: Vec<(u64, PathBuf, TrainConfig)> = cfg
        .options
        .seeds
        .iter()
        .map(|&seed| (seed, out.join(format!("seed_{seed}")), TrainConfig { seed, ..base.clone() }))
        .collect();
    let results = sgp_core::par::map_slice(&runs, |(_, dir, tc)| -> Result<_> {
        let dir = OutputDir::new(dir)?;
        Ok(train(tc, Some(&dir)))
    });
    let mut summaries = Vec::new();
    let mut numerical = false;
    for ((seed, dir, _), result) in runs.iter().zip(results) {
        let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let summary = match result? {
            Ok(rec) => {
                let last = rec.last();
                SeedSummary {
                    seed: *seed,
                    dir: name,
                    final_iter: last.iter,
                    wgan_loss: last.wgan_loss,
                    mode_coverage: last.mode_coverage,
                    high_quality_fraction: last.high_quality_fraction,
                    error: None,
                }
            }
            Err(e @ sgp_core::Error::NumericalFailure { .. }) => {
                numerical = true;
                SeedSummary {
                    seed: *seed,
                    dir: name,
                    final_iter: 0,
                    wgan_loss: f64::NAN,
                    mode_coverage: None,
                    high_quality_fraction: None,
                    error: Some(e.to_string()),
                }
            }
            Err(e) => return Err(e.into()),
        };
        summaries.push(summary);
    }
    let summary = pretty(&summaries)?;
    write(out, "summary.json", &summary)?;
    Ok(Outcome { stdout: Some(summary), exit_code: if numerical { 3 } else { 0 } })
}

fn run_assumptions(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let (problem, psi, theta) = problem_point(cfg)?;
    let report = check_assumptions(&problem, &psi, &theta, AssumptionConfig { n: cfg.mc_n, seed: cfg.seed, ..Default::default() });
    let json = pretty(&report)?;
    write(out, "assumptions.json", &json)?;
    Ok(Outcome::ok(Some(json)))
}
