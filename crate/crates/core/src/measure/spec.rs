use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    make_table1_measure, Discrete, FiniteMeasure, MassProfile, PenaltyKind, Scaled,
    TranslatedDirac, Uniform, UniformFamily,
};
use crate::error::{Error, Result};

/// Serializable description of a penalty measure.
///
/// `kind` is one of `dirac` (params: the point), `dirac_theta`,
/// `uniform` (params: `[lo, hi]`), `uniform_zero_to_theta`,
/// `uniform_symmetric_theta`, or a penalty kind `pg`, `pd`, `gp`, `mid`,
/// `g_anc`. The last five need the problem's data and generator
/// distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<Vec<f64>>,
    #[serde(default = "unit_mass")]
    pub mass: MassProfile,
    #[serde(default)]
    pub params: Vec<f64>,
}

fn unit_mass() -> MassProfile {
    MassProfile::Constant(1.0)
}

impl MeasureSpec {
    pub fn new(kind: impl Into<String>) -> Self {
        MeasureSpec {
            kind: kind.into(),
            anchor: None,
            mass: unit_mass(),
            params: Vec::new(),
        }
    }

    pub fn with_mass(mut self, mass: MassProfile) -> Self {
        self.mass = mass;
        self
    }

    pub fn with_params(mut self, params: Vec<f64>) -> Self {
        self.params = params;
        self
    }

    pub fn with_anchor(mut self, anchor: Vec<f64>) -> Self {
        self.anchor = Some(anchor);
        self
    }

    pub fn penalty_kind(&self) -> Option<PenaltyKind> {
        self.kind.parse().ok()
    }

    /// Instantiate. `context` carries `(p_d, p_θ)` for the penalty kinds.
    pub fn build(
        &self,
        context: Option<(Arc<dyn FiniteMeasure>, Arc<dyn FiniteMeasure>)>,
    ) -> Result<Arc<dyn FiniteMeasure>> {
        let index = |default: usize| -> usize { self.params.first().map_or(default, |v| *v as usize) };
        let base: Arc<dyn FiniteMeasure> = match self.kind.as_str() {
            "dirac" => {
                if self.params.is_empty() {
                    return Err(Error::config("dirac measure needs its point in `params`"));
                }
                Arc::new(Discrete::dirac(self.params.clone(), 1.0))
            }
            "dirac_theta" => Arc::new(TranslatedDirac::new(index(1).max(1))),
            "uniform" => match self.params[..] {
                [lo, hi] => Arc::new(Uniform::new(UniformFamily::Fixed { lo, hi }, 1.0)?),
                _ => return Err(Error::config("uniform measure needs params [lo, hi]")),
            },
            "uniform_zero_to_theta" => Arc::new(Uniform::zero_to_theta(index(0))),
            "uniform_symmetric_theta" => Arc::new(Uniform::symmetric_theta(index(0))),
            other => {
                let kind: PenaltyKind = other.parse().map_err(|_| {
                    Error::config(format!("unknown measure kind `{other}`"))
                })?;
                let (data, model) = context.ok_or_else(|| {
                    Error::config(format!("measure `{kind}` needs data and generator distributions"))
                })?;
                Arc::new(make_table1_measure(kind, self.anchor.clone(), data, model)?)
            }
        };
        if self.anchor.is_some() && self.penalty_kind().is_none() {
            return Err(Error::config(format!("measure `{}` takes no anchor", self.kind)));
        }
        Ok(match self.mass {
            MassProfile::Constant(1.0) => base,
            profile => Arc::new(Scaled::new(base, profile)),
        })
    }
}
