//! JSON problem descriptions: a named toy system or a 2D GAN run.

use serde::{Deserialize, Serialize};

use crate::analytic::{ToyKind, ToySystem2D};
use crate::dynamics::{dirac_problem, quadratic_dirac_problem, quadratic_problem, SgpField, SgpProblem};
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::gan2d::TrainConfig;
use crate::measure::{MassProfile, MeasureSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Toy(ToySpec),
    Gan2d(TrainConfig),
}

/// A planar toy system.
///
/// `mass` applies to the Dirac GAN's penalty `M·δ₀`; `penalty` replaces the
/// quadratic GAN's default `U(−|θ|,|θ|)`. The quadratic Dirac GAN takes
/// neither.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToySpec {
    pub system: ToyKind,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "unit_mass")]
    pub mass: MassProfile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty: Option<MeasureSpec>,
    /// Point of interest; defaults to the canonical equilibrium.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<[f64; 2]>,
}

fn default_rho() -> f64 {
    1.0
}

fn unit_mass() -> MassProfile {
    MassProfile::Constant(1.0)
}

impl ToySpec {
    pub fn new(system: ToyKind, rho: f64) -> Self {
        ToySpec { system, rho, mass: unit_mass(), penalty: None, at: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho >= 0.0) || !self.rho.is_finite() {
            return Err(Error::config(format!("rho must be finite and non-negative, got {}", self.rho)));
        }
        if self.system != ToyKind::Dirac && self.mass != unit_mass() {
            return Err(Error::config(format!("`mass` only applies to the dirac system, not {}", self.system)));
        }
        if self.system != ToyKind::Quadratic && self.penalty.is_some() {
            return Err(Error::config(format!("`penalty` only applies to the quadratic system, not {}", self.system)));
        }
        if self.system == ToyKind::QuadraticDirac && self.rho == 0.0 {
            return Err(Error::config("the quadratic-dirac system needs rho > 0"));
        }
        Ok(())
    }

    /// The canonical equilibrium, or `at` when given.
    pub fn point(&self) -> [f64; 2] {
        self.at.unwrap_or(match self.system {
            ToyKind::Dirac | ToyKind::QuadraticDirac => [0.0, 0.0],
            ToyKind::Quadratic => [0.0, 1.0],
        })
    }

    /// The Monte-Carlo formulation as an SGP problem.
    pub fn sgp_problem(&self) -> Result<SgpProblem> {
        self.validate()?;
        match self.system {
            ToyKind::Dirac => dirac_problem(self.rho, self.mass),
            ToyKind::QuadraticDirac => quadratic_dirac_problem(self.rho),
            ToyKind::Quadratic => {
                let base = quadratic_problem(self.rho, None)?;
                match &self.penalty {
                    None => Ok(base),
                    Some(spec) => {
                        let mu = spec.build(Some((base.data.clone(), base.model_distribution())))?;
                        base.with_penalty(mu)
                    }
                }
            }
        }
    }

    /// Drift as a flat field: the closed form where one exists, otherwise
    /// the Monte-Carlo drift with `mc_n` samples per evaluation.
    pub fn field(&self, mc_n: usize) -> Result<Box<dyn VectorField>> {
        self.validate()?;
        if self.penalty.is_some() {
            if mc_n == 0 {
                return Err(Error::config("Monte-Carlo sample count must be at least 1"));
            }
            return Ok(Box::new(SgpField { problem: self.sgp_problem()?, n: mc_n }));
        }
        Ok(Box::new(self.system()?))
    }

    /// Closed-form planar system (no custom penalty).
    pub fn system(&self) -> Result<ToySystem2D> {
        self.validate()?;
        if self.penalty.is_some() {
            return Err(Error::config("a custom penalty has no closed-form planar system"));
        }
        Ok(ToySystem2D::by_kind(self.system, self.rho, self.mass))
    }
}

/// CSV of drift evaluations: the point's components, then the drift
/// components as `<name>_dot`, all evaluated with `seed`. Components without
/// a name are called `x0, x1, ...`.
pub fn drift_csv(field: &dyn VectorField, names: &[&str], points: &[Vec<f64>], seed: u64) -> Result<String> {
    let d = field.dim();
    let mut header: Vec<String> = (0..d).map(|i| names.get(i).map_or_else(|| format!("x{i}"), |s| s.to_string())).collect();
    let dots: Vec<String> = header.iter().map(|h| format!("{h}_dot")).collect();
    header.extend(dots);
    let mut out = header.join(",");
    out.push('\n');
    for p in points {
        let v = field.eval(p, seed)?;
        let cells: Vec<String> = p.iter().chain(&v).map(|x| (x + 0.0).to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    Ok(out)
}
