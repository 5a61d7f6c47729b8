use std::sync::Arc;

use rand::Rng;

use super::{Dependence, FiniteMeasure, ParamIndex, Params, WeakDerivativeTriple};
use crate::batch::Batch;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, streams};

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Stratified uniforms on `[0, 1)`: draw `i` lies in `[i/n, (i+1)/n)`.
/// Marginally each draw is `U(0,1)`; the stratification removes most of the
/// Monte-Carlo noise for smooth integrands.
pub(crate) fn stratified_unit(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, streams::MEASURE);
    let inv = 1.0 / n as f64;
    (0..n)
        .map(|i| (i as f64 + rng.gen::<f64>()) * inv)
        .collect()
}

/// Finitely many weighted atoms, scaled to total `mass`.
#[derive(Debug, Clone)]
pub struct Discrete {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
    mass: f64,
}

impl Discrete {
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>, mass: f64) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(Error::config("discrete measure needs one weight per atom"));
        }
        let dim = atoms[0].len();
        if dim == 0 || atoms.iter().any(|a| a.len() != dim) {
            return Err(Error::config("discrete atoms must share a positive dimension"));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) || mass < 0.0 || !mass.is_finite() {
            return Err(Error::config("weights and mass must be non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::config("discrete weights sum to zero"));
        }
        let weights = weights.iter().map(|w| w / total).collect();
        Ok(Discrete { atoms, weights, mass })
    }

    /// `mass · δ_point`.
    pub fn dirac(point: Vec<f64>, mass: f64) -> Self {
        Discrete::new(vec![point], vec![1.0], mass).expect("valid dirac")
    }
}

impl FiniteMeasure for Discrete {
    fn name(&self) -> String {
        if self.atoms.len() == 1 {
            format!("{}*dirac{:?}", self.mass, self.atoms[0])
        } else {
            format!("{}*discrete[{} atoms]", self.mass, self.atoms.len())
        }
    }

    fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    fn mass(&self, _p: Params<'_>) -> f64 {
        self.mass
    }

    fn sample(&self, _p: Params<'_>, n: usize, seed: u64) -> Batch {
        if self.atoms.len() == 1 {
            return Batch::repeat(&self.atoms[0], n);
        }
        let mut cdf = Vec::with_capacity(self.weights.len());
        let mut acc = 0.0;
        for w in &self.weights {
            acc += w;
            cdf.push(acc);
        }
        let rows = stratified_unit(n, seed).into_iter().map(|u| {
            let k = cdf.iter().position(|c| u < *c).unwrap_or(cdf.len() - 1);
            &self.atoms[k]
        });
        Batch::from_rows(self.dim(), rows)
    }

    fn contains(&self, x: &[f64], _p: Params<'_>, tol: f64) -> bool {
        self.atoms
            .iter()
            .zip(&self.weights)
            .any(|(a, w)| *w > 0.0 && distance(a, x) <= tol)
    }

    fn dependence(&self) -> Dependence {
        Dependence::NONE
    }

    fn atom(&self, _p: Params<'_>) -> Option<Vec<f64>> {
        (self.atoms.len() == 1).then(|| self.atoms[0].clone())
    }

    fn weak_derivative(&self, _p: Params<'_>, _idx: ParamIndex) -> Result<Option<WeakDerivativeTriple>> {
        Ok(None)
    }
}

/// The translated Dirac family `δ_θ` (location read from `θ[offset..offset+dim]`).
///
/// It is weakly continuous in θ but has no weak derivative; only the
/// finite-difference route can differentiate integrals against it.
#[derive(Debug, Clone)]
pub struct TranslatedDirac {
    dim: usize,
    offset: usize,
}

impl TranslatedDirac {
    pub fn new(dim: usize) -> Self {
        TranslatedDirac { dim, offset: 0 }
    }

    pub fn with_offset(dim: usize, offset: usize) -> Self {
        TranslatedDirac { dim, offset }
    }

    fn location(&self, p: Params<'_>) -> Vec<f64> {
        p.theta[self.offset..self.offset + self.dim].to_vec()
    }
}

impl FiniteMeasure for TranslatedDirac {
    fn name(&self) -> String {
        "dirac(theta)".into()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn mass(&self, _p: Params<'_>) -> f64 {
        1.0
    }

    fn sample(&self, p: Params<'_>, n: usize, _seed: u64) -> Batch {
        Batch::repeat(&self.location(p), n)
    }

    fn contains(&self, x: &[f64], p: Params<'_>, tol: f64) -> bool {
        distance(&self.location(p), x) <= tol
    }

    fn dependence(&self) -> Dependence {
        Dependence { psi: false, theta: true }
    }

    fn atom(&self, p: Params<'_>) -> Option<Vec<f64>> {
        Some(self.location(p))
    }

    fn weak_derivative(&self, _p: Params<'_>, idx: ParamIndex) -> Result<Option<WeakDerivativeTriple>> {
        match idx {
            ParamIndex::Theta(i) if i >= self.offset && i < self.offset + self.dim => {
                Err(Error::NoWeakDerivative {
                    measure: self.name(),
                    component: idx.to_string(),
                })
            }
            _ => Ok(None),
        }
    }
}

/// Endpoints of a one-dimensional uniform family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UniformFamily {
    /// `U(lo, hi)`, parameter free.
    Fixed { lo: f64, hi: f64 },
    /// `U(0, θ_k)`, or `U(θ_k, 0)` for negative θ_k; `U(0,0) = δ₀`.
    ZeroTo(usize),
    /// `U(−|θ_k|, |θ_k|)`; degenerates to `δ₀` at θ_k = 0.
    Symmetric(usize),
}

/// One-dimensional uniform measure of constant `mass`, sampled with
/// stratified draws.
#[derive(Debug, Clone)]
pub struct Uniform {
    family: UniformFamily,
    mass: f64,
}

impl Uniform {
    pub fn new(family: UniformFamily, mass: f64) -> Result<Self> {
        if !(mass >= 0.0) || !mass.is_finite() {
            return Err(Error::config("uniform mass must be finite and non-negative"));
        }
        if let UniformFamily::Fixed { lo, hi } = family {
            if !(lo <= hi) {
                return Err(Error::config(format!("uniform needs lo <= hi, got [{lo}, {hi}]")));
            }
        }
        Ok(Uniform { family, mass })
    }

    pub fn fixed(lo: f64, hi: f64) -> Self {
        Uniform::new(UniformFamily::Fixed { lo, hi }, 1.0).expect("valid interval")
    }

    pub fn zero_to_theta(k: usize) -> Self {
        Uniform::new(UniformFamily::ZeroTo(k), 1.0).expect("valid family")
    }

    pub fn symmetric_theta(k: usize) -> Self {
        Uniform::new(UniformFamily::Symmetric(k), 1.0).expect("valid family")
    }

    pub fn with_mass(mut self, mass: f64) -> Self {
        self.mass = mass;
        self
    }

    pub fn interval(&self, p: Params<'_>) -> (f64, f64) {
        match self.family {
            UniformFamily::Fixed { lo, hi } => (lo, hi),
            UniformFamily::ZeroTo(k) => {
                let t = p.theta[k];
                if t >= 0.0 {
                    (0.0, t)
                } else {
                    (t, 0.0)
                }
            }
            UniformFamily::Symmetric(k) => {
                let t = p.theta[k].abs();
                (-t, t)
            }
        }
    }
}

impl FiniteMeasure for Uniform {
    fn name(&self) -> String {
        match self.family {
            UniformFamily::Fixed { lo, hi } => format!("{}*uniform({lo},{hi})", self.mass),
            UniformFamily::ZeroTo(k) => format!("{}*uniform(0,theta[{k}])", self.mass),
            UniformFamily::Symmetric(k) => format!("{}*uniform(-|theta[{k}]|,|theta[{k}]|)", self.mass),
        }
    }

    fn dim(&self) -> usize {
        1
    }

    fn mass(&self, _p: Params<'_>) -> f64 {
        self.mass
    }

    fn sample(&self, p: Params<'_>, n: usize, seed: u64) -> Batch {
        let (lo, hi) = self.interval(p);
        let width = hi - lo;
        let data = stratified_unit(n, seed)
            .into_iter()
            .map(|u| lo + width * u)
            .collect();
        Batch::new(1, data)
    }

    fn contains(&self, x: &[f64], p: Params<'_>, tol: f64) -> bool {
        let (lo, hi) = self.interval(p);
        x[0] >= lo - tol && x[0] <= hi + tol
    }

    fn dependence(&self) -> Dependence {
        match self.family {
            UniformFamily::Fixed { .. } => Dependence::NONE,
            _ => Dependence { psi: false, theta: true },
        }
    }

    fn atom(&self, p: Params<'_>) -> Option<Vec<f64>> {
        let (lo, hi) = self.interval(p);
        (lo == hi).then(|| vec![lo])
    }

    fn weak_derivative(&self, p: Params<'_>, idx: ParamIndex) -> Result<Option<WeakDerivativeTriple>> {
        let k = match (self.family, idx) {
            (UniformFamily::ZeroTo(k), ParamIndex::Theta(i))
            | (UniformFamily::Symmetric(k), ParamIndex::Theta(i))
                if i == k =>
            {
                k
            }
            _ => return Ok(None),
        };
        let t = p.theta[k];
        if t == 0.0 {
            // The family is not differentiable through its degenerate member.
            return Err(Error::NoWeakDerivative {
                measure: self.name(),
                component: idx.to_string(),
            });
        }
        let (lo, hi) = self.interval(p);
        let current: Arc<dyn FiniteMeasure> = Arc::new(Uniform::fixed(lo, hi));
        let c = 1.0 / t.abs();
        let triple = match self.family {
            // d/dθ E_{U(0,θ)}[φ] = (φ(θ) − E[φ]) / θ
            UniformFamily::ZeroTo(_) => {
                let endpoint: Arc<dyn FiniteMeasure> = Arc::new(Discrete::dirac(vec![t], 1.0));
                if t > 0.0 {
                    WeakDerivativeTriple { c, plus: endpoint, minus: current }
                } else {
                    WeakDerivativeTriple { c, plus: current, minus: endpoint }
                }
            }
            // d/dθ E_{U(-θ,θ)}[φ] = ((φ(θ)+φ(−θ))/2 − E[φ]) / θ for θ > 0
            UniformFamily::Symmetric(_) => {
                let ends: Arc<dyn FiniteMeasure> = Arc::new(
                    Discrete::new(vec![vec![-t.abs()], vec![t.abs()]], vec![0.5, 0.5], 1.0)?,
                );
                if t > 0.0 {
                    WeakDerivativeTriple { c, plus: ends, minus: current }
                } else {
                    WeakDerivativeTriple { c, plus: current, minus: ends }
                }
            }
            UniformFamily::Fixed { .. } => unreachable!(),
        };
        Ok(Some(triple))
    }
}
