use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Dependence, FiniteMeasure, ParamIndex, Params, WeakDerivativeTriple};
use crate::batch::Batch;
use crate::error::{Error, Result};
use crate::rng::{child_seed, stream_rng, streams};

/// The five probability penalty measures built from data draws `x_d`,
/// generator draws `x_g`, and `α ~ U(0,1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    /// `x̂ = x_g`
    Pg,
    /// `x̂ = x_d`
    Pd,
    /// `x̂ = α x_d + (1 − α) x_g`
    Gp,
    /// `x̂ = (x_d + x_g) / 2`
    Mid,
    /// `x̂ = α A + (1 − α) x_g` for a fixed anchor `A`
    GAnc,
}

impl PenaltyKind {
    pub const ALL: [PenaltyKind; 5] = [
        PenaltyKind::Pg,
        PenaltyKind::Pd,
        PenaltyKind::Gp,
        PenaltyKind::Mid,
        PenaltyKind::GAnc,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PenaltyKind::Pg => "pg",
            PenaltyKind::Pd => "pd",
            PenaltyKind::Gp => "gp",
            PenaltyKind::Mid => "mid",
            PenaltyKind::GAnc => "g_anc",
        }
    }
}

impl fmt::Display for PenaltyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PenaltyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PenaltyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown penalty measure `{s}`")))
    }
}

#[derive(Debug, Clone)]
pub struct Table1Measure {
    kind: PenaltyKind,
    anchor: Option<Vec<f64>>,
    data: Arc<dyn FiniteMeasure>,
    model: Arc<dyn FiniteMeasure>,
}

/// Build one of the five penalty measures. `data` is `p_d`, `model` is `p_θ`;
/// the anchor is required for, and only for, `g_anc`.
pub fn make_table1_measure(
    kind: PenaltyKind,
    anchor: Option<Vec<f64>>,
    data: Arc<dyn FiniteMeasure>,
    model: Arc<dyn FiniteMeasure>,
) -> Result<Table1Measure> {
    if data.dim() != model.dim() {
        return Err(Error::config(format!(
            "data dimension {} differs from generator dimension {}",
            data.dim(),
            model.dim()
        )));
    }
    let anchor = match (kind, anchor) {
        (PenaltyKind::GAnc, None) => {
            return Err(Error::config("g_anc penalty measure requires an anchor"))
        }
        (PenaltyKind::GAnc, Some(a)) => {
            if a.len() != data.dim() {
                return Err(Error::config(format!(
                    "anchor has dimension {}, expected {}",
                    a.len(),
                    data.dim()
                )));
            }
            Some(a)
        }
        (_, Some(_)) => {
            return Err(Error::config(format!("penalty measure `{kind}` takes no anchor")))
        }
        (_, None) => None,
    };
    Ok(Table1Measure { kind, anchor, data, model })
}

impl Table1Measure {
    pub fn kind(&self) -> PenaltyKind {
        self.kind
    }

    pub fn anchor(&self) -> Option<&[f64]> {
        self.anchor.as_deref()
    }

    /// Combine endpoint batches exactly as the sampler does.
    pub fn combine(&self, x_d: &Batch, x_g: &Batch, alpha: &[f64]) -> Batch {
        let dim = x_g.dim();
        let mut out = Batch::zeros(dim, x_g.len());
        for i in 0..x_g.len() {
            let g = x_g.row(i);
            let row = out.row_mut(i);
            match self.kind {
                PenaltyKind::Pg => row.copy_from_slice(g),
                PenaltyKind::Pd => row.copy_from_slice(x_d.row(i)),
                PenaltyKind::Gp => {
                    let a = alpha[i];
                    for ((r, d), g) in row.iter_mut().zip(x_d.row(i)).zip(g) {
                        *r = a * d + (1.0 - a) * g;
                    }
                }
                PenaltyKind::Mid => {
                    for ((r, d), g) in row.iter_mut().zip(x_d.row(i)).zip(g) {
                        *r = 0.5 * d + 0.5 * g;
                    }
                }
                PenaltyKind::GAnc => {
                    let a = alpha[i];
                    let anchor = self.anchor.as_deref().expect("anchor checked at construction");
                    for ((r, c), g) in row.iter_mut().zip(anchor).zip(g) {
                        *r = a * c + (1.0 - a) * g;
                    }
                }
            }
        }
        out
    }
}

/// Uniform draws for the interpolation weight, shared by every consumer that
/// is handed the same root seed.
pub fn mixing_weights(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, streams::MIX);
    (0..n).map(|_| rng.gen::<f64>()).collect()
}

fn segment_distance(x: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab: Vec<f64> = b.iter().zip(a).map(|(b, a)| b - a).collect();
    let len2: f64 = ab.iter().map(|v| v * v).sum();
    let t = if len2 == 0.0 {
        0.0
    } else {
        (x.iter().zip(a).zip(&ab).map(|((x, a), d)| (x - a) * d).sum::<f64>() / len2).clamp(0.0, 1.0)
    };
    x.iter()
        .zip(a)
        .zip(&ab)
        .map(|((x, a), d)| (x - a - t * d).powi(2))
        .sum::<f64>()
        .sqrt()
}

impl FiniteMeasure for Table1Measure {
    fn name(&self) -> String {
        format!("mu_{}", self.kind)
    }

    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn mass(&self, _p: Params<'_>) -> f64 {
        1.0
    }

    fn sample(&self, p: Params<'_>, n: usize, seed: u64) -> Batch {
        if self.kind == PenaltyKind::Pd {
            return self.data.sample(p, n, child_seed(seed, streams::DATA));
        }
        let x_g = self.model.sample(p, n, child_seed(seed, streams::LATENT));
        match self.kind {
            PenaltyKind::Pg => x_g,
            PenaltyKind::GAnc => self.combine(&x_g, &x_g, &mixing_weights(n, seed)),
            _ => {
                let x_d = self.data.sample(p, n, child_seed(seed, streams::DATA));
                let alpha = if self.kind == PenaltyKind::Gp {
                    mixing_weights(n, seed)
                } else {
                    Vec::new()
                };
                self.combine(&x_d, &x_g, &alpha)
            }
        }
    }

    fn contains(&self, x: &[f64], p: Params<'_>, tol: f64) -> bool {
        let d = self.data.atom(p);
        let g = self.model.atom(p);
        match self.kind {
            PenaltyKind::Pd => self.data.contains(x, p, tol),
            PenaltyKind::Pg => self.model.contains(x, p, tol),
            PenaltyKind::Mid => match (d, g) {
                (Some(d), Some(g)) => {
                    let m: Vec<f64> = d.iter().zip(&g).map(|(a, b)| 0.5 * (a + b)).collect();
                    segment_distance(x, &m, &m) <= tol
                }
                _ => true,
            },
            PenaltyKind::Gp => match (d, g) {
                (Some(d), Some(g)) => segment_distance(x, &d, &g) <= tol,
                _ => true,
            },
            PenaltyKind::GAnc => match g {
                Some(g) => segment_distance(x, self.anchor.as_deref().unwrap(), &g) <= tol,
                None => true,
            },
        }
    }

    fn dependence(&self) -> Dependence {
        let theta = match self.kind {
            PenaltyKind::Pd => self.data.dependence().theta,
            _ => self.model.dependence().theta || self.data.dependence().theta,
        };
        Dependence { psi: false, theta }
    }

    fn atom(&self, p: Params<'_>) -> Option<Vec<f64>> {
        match self.kind {
            PenaltyKind::Pd => self.data.atom(p),
            PenaltyKind::Pg => self.model.atom(p),
            PenaltyKind::Mid => {
                let (d, g) = (self.data.atom(p)?, self.model.atom(p)?);
                Some(d.iter().zip(&g).map(|(a, b)| 0.5 * (a + b)).collect())
            }
            PenaltyKind::Gp => {
                let (d, g) = (self.data.atom(p)?, self.model.atom(p)?);
                (d == g).then_some(d)
            }
            PenaltyKind::GAnc => {
                let g = self.model.atom(p)?;
                (self.anchor.as_deref() == Some(&g[..])).then_some(g)
            }
        }
    }

    fn weak_derivative(&self, _p: Params<'_>, idx: ParamIndex) -> Result<Option<WeakDerivativeTriple>> {
        if !self.dependence().on(idx) {
            return Ok(None);
        }
        Err(Error::NoWeakDerivative {
            measure: self.name(),
            component: idx.to_string(),
        })
    }
}
