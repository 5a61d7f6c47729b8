//! Run configuration: what the `run` command reads from JSON and what every
//! command writes back as `manifest.json` once defaults are filled in.

use std::path::PathBuf;

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};
use sgp_core::analytic::ToyKind;
use sgp_core::problems::{ProblemSpec, ToySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Analyze,
    Portrait,
    Integrate,
    Train2d,
    CheckAssumptions,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Analyze => "analyze",
            CommandKind::Portrait => "portrait",
            CommandKind::Integrate => "integrate",
            CommandKind::Train2d => "train2d",
            CommandKind::CheckAssumptions => "check-assumptions",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// RK4 on the continuous drift.
    Ode,
    /// Simultaneous gradient steps.
    Gd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: CommandKind,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub seed: u64,
    /// Monte-Carlo sample count for drift, block and assumption estimates.
    #[serde(default = "default_mc_n")]
    pub mc_n: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub options: Options,
}

pub fn default_mc_n() -> usize {
    100_000
}

/// Command-specific numeric options; unused ones are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Options {
    pub dt: f64,
    pub t_max: f64,
    pub method: Method,
    pub lr: f64,
    pub steps: usize,
    /// Stop integration once within 1e-4 of the problem's point.
    pub stop_at_point: bool,
    pub start: Option<[f64; 2]>,
    /// `[psi_min, psi_max, theta_min, theta_max]`.
    #[serde(rename = "box")]
    pub bounds: Option<[f64; 4]>,
    pub resolution: usize,
    pub starts: Vec<[f64; 2]>,
    pub seeds: Vec<u64>,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            dt: 0.01,
            t_max: 20.0,
            method: Method::Ode,
            lr: 0.01,
            steps: 2000,
            stop_at_point: false,
            start: None,
            bounds: None,
            resolution: 41,
            starts: Vec::new(),
            seeds: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn toy(&self) -> Result<&ToySpec> {
        match &self.problem {
            ProblemSpec::Toy(t) => Ok(t),
            ProblemSpec::Gan2d(_) => bail!("command {} needs a toy problem", self.command.name()),
        }
    }

    /// Fill every defaulted option with its concrete value and check the
    /// combination, so the manifest records exactly what ran.
    pub fn resolve(mut self) -> Result<Self> {
        if self.out.is_none() {
            bail!("no output directory: pass --out or set \"out\"");
        }
        if self.mc_n == 0 {
            bail!("mc_n must be at least 1");
        }
        match &mut self.problem {
            ProblemSpec::Toy(t) => {
                t.validate()?;
                if t.penalty.is_some() {
                    t.sgp_problem()?;
                }
                if t.at.is_none() {
                    t.at = Some(t.point());
                }
            }
            ProblemSpec::Gan2d(g) => g.validate()?,
        }
        let o = &mut self.options;
        match (&self.problem, self.command) {
            (ProblemSpec::Gan2d(_), CommandKind::Portrait | CommandKind::Integrate) => {
                bail!("command {} needs a toy problem", self.command.name())
            }
            (ProblemSpec::Toy(_), CommandKind::Train2d) => bail!("train2d needs a gan2d problem"),
            (ProblemSpec::Toy(t), CommandKind::Integrate) => {
                if o.start.is_none() {
                    let p = t.point();
                    o.start = Some(default_start(t.system, p));
                }
            }
            (ProblemSpec::Toy(t), CommandKind::Portrait) => {
                let b = *o.bounds.get_or_insert(default_box(t.system));
                if !(b[1] > b[0] && b[3] > b[2]) || b.iter().any(|v| !v.is_finite()) {
                    bail!("box must be psi_min,psi_max,theta_min,theta_max with positive extent");
                }
                if o.resolution < 8 {
                    bail!("resolution must be at least 8");
                }
                if o.starts.is_empty() {
                    o.starts = default_starts(b);
                }
            }
            (ProblemSpec::Gan2d(g), CommandKind::Train2d) => {
                if o.seeds.is_empty() {
                    o.seeds = vec![g.seed];
                }
                let mut seen = o.seeds.clone();
                seen.sort_unstable();
                seen.dedup();
                if seen.len() != o.seeds.len() {
                    bail!("seeds must be distinct");
                }
            }
            _ => {}
        }
        if !(o.dt > 0.0 && o.dt.is_finite()) || !(o.t_max >= o.dt && o.t_max.is_finite()) {
            bail!("need dt > 0 and t_max >= dt");
        }
        if !(o.lr > 0.0 && o.lr.is_finite()) {
            bail!("lr must be positive");
        }
        Ok(self)
    }
}

pub fn default_box(system: ToyKind) -> [f64; 4] {
    match system {
        ToyKind::Dirac => [-3.0, 3.0, -3.0, 3.0],
        ToyKind::Quadratic => [-2.0, 2.0, -2.0, 2.0],
        ToyKind::QuadraticDirac => [-4.0, 2.0, -2.0, 2.0],
    }
}

fn default_start(system: ToyKind, p: [f64; 2]) -> [f64; 2] {
    match system {
        ToyKind::Quadratic => [p[0] + 0.3, p[1] + 0.3],
        _ => [p[0] + 1.0, p[1] + 0.5],
    }
}

fn default_starts(b: [f64; 4]) -> Vec<[f64; 2]> {
    let at = |u: f64, v: f64| [b[0] + u * (b[1] - b[0]), b[2] + v * (b[3] - b[2])];
    vec![at(0.2, 0.2), at(0.8, 0.8), at(0.2, 0.8), at(0.8, 0.2)]
}
