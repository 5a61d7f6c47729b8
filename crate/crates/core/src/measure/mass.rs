use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Dependence, FiniteMeasure, ParamIndex, Params, WeakDerivativeTriple};
use crate::batch::Batch;
use crate::error::{Error, Result};

/// Closed-form mass functions `M(ψ, θ)` used to turn probability measures
/// into general finite measures.
///
/// Textual form (CLI and JSON): `const:c`, `bump:r2` for
/// `max(0, 1 − (‖ψ‖² + ‖θ‖²)/r2)`, `psi2` for `‖ψ‖²`, and `gauss:c` for
/// `c·exp(−‖ψ‖² − ‖θ‖²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MassProfile {
    Constant(f64),
    Bump { r2: f64 },
    PsiSquared,
    Gaussian(f64),
}

fn sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

impl MassProfile {
    pub fn value(&self, p: Params<'_>) -> f64 {
        match *self {
            MassProfile::Constant(c) => c,
            MassProfile::Bump { r2 } => (1.0 - (sq(p.psi) + sq(p.theta)) / r2).max(0.0),
            MassProfile::PsiSquared => sq(p.psi),
            MassProfile::Gaussian(c) => c * (-sq(p.psi) - sq(p.theta)).exp(),
        }
    }

    pub fn partial(&self, p: Params<'_>, idx: ParamIndex) -> f64 {
        let v = p.get(idx);
        match *self {
            MassProfile::Constant(_) => 0.0,
            MassProfile::Bump { r2 } => {
                if sq(p.psi) + sq(p.theta) < r2 {
                    -2.0 * v / r2
                } else {
                    0.0
                }
            }
            MassProfile::PsiSquared => match idx {
                ParamIndex::Psi(_) => 2.0 * v,
                ParamIndex::Theta(_) => 0.0,
            },
            MassProfile::Gaussian(_) => -2.0 * v * self.value(p),
        }
    }

    pub fn dependence(&self) -> Dependence {
        match self {
            MassProfile::Constant(_) => Dependence::NONE,
            MassProfile::PsiSquared => Dependence { psi: true, theta: false },
            _ => Dependence { psi: true, theta: true },
        }
    }
}

impl fmt::Display for MassProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MassProfile::Constant(c) => write!(f, "const:{c}"),
            MassProfile::Bump { r2 } => write!(f, "bump:{r2}"),
            MassProfile::PsiSquared => write!(f, "psi2"),
            MassProfile::Gaussian(c) => write!(f, "gauss:{c}"),
        }
    }
}

impl FromStr for MassProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let num = |a: Option<&str>| -> Result<f64> {
            let a = a.ok_or_else(|| Error::config(format!("mass profile `{s}` needs a value")))?;
            a.trim()
                .parse::<f64>()
                .map_err(|_| Error::config(format!("bad number in mass profile `{s}`")))
        };
        let profile = match head.trim() {
            "const" => MassProfile::Constant(num(arg)?),
            "bump" => MassProfile::Bump { r2: num(arg)? },
            "psi2" => MassProfile::PsiSquared,
            "gauss" => MassProfile::Gaussian(num(arg)?),
            other => return Err(Error::config(format!("unknown mass profile `{other}`"))),
        };
        match profile {
            MassProfile::Constant(c) | MassProfile::Gaussian(c) if !(c >= 0.0 && c.is_finite()) => {
                Err(Error::config("mass must be finite and non-negative"))
            }
            MassProfile::Bump { r2 } if !(r2 > 0.0 && r2.is_finite()) => {
                Err(Error::config("bump radius must be positive"))
            }
            p => Ok(p),
        }
    }
}

impl Serialize for MassProfile {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MassProfile {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `M(ψ,θ) · base`, a finite measure whose mass follows a profile.
#[derive(Debug, Clone)]
pub struct Scaled {
    base: Arc<dyn FiniteMeasure>,
    profile: MassProfile,
}

impl Scaled {
    pub fn new(base: Arc<dyn FiniteMeasure>, profile: MassProfile) -> Self {
        Scaled { base, profile }
    }
}

impl FiniteMeasure for Scaled {
    fn name(&self) -> String {
        format!("[{}]*{}", self.profile, self.base.name())
    }

    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn mass(&self, p: Params<'_>) -> f64 {
        self.profile.value(p) * self.base.mass(p)
    }

    fn sample(&self, p: Params<'_>, n: usize, seed: u64) -> Batch {
        self.base.sample(p, n, seed)
    }

    fn contains(&self, x: &[f64], p: Params<'_>, tol: f64) -> bool {
        self.base.contains(x, p, tol)
    }

    fn dependence(&self) -> Dependence {
        self.base.dependence().union(self.profile.dependence())
    }

    fn atom(&self, p: Params<'_>) -> Option<Vec<f64>> {
        self.base.atom(p)
    }

    fn mass_partial(&self, p: Params<'_>, idx: ParamIndex) -> f64 {
        self.profile.partial(p, idx) * self.base.mass(p)
            + self.profile.value(p) * self.base.mass_partial(p, idx)
    }

    fn weak_derivative(&self, p: Params<'_>, idx: ParamIndex) -> Result<Option<WeakDerivativeTriple>> {
        self.base.weak_derivative(p, idx)
    }
}
