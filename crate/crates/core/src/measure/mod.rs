//! Finite penalty measures.
//!
//! A finite measure is handled as `mass(ψ, θ) × μ̄_{ψ,θ}` where `μ̄` is a
//! probability measure we can only sample from. Nothing here needs a density,
//! so point masses, segments and other singular supports cost the same as
//! anything else.
//!
//! Derivatives of `∫ φ dμ` with respect to a parameter are taken either from
//! an analytic weak-derivative triple `(c, P⁺, P⁻)` of the normalized part,
//! combined with the mass by the product rule, or by a central finite
//! difference of the Monte-Carlo estimate under common random numbers.

mod builtin;
mod mass;
mod spec;
mod table1;

pub use builtin::{Discrete, TranslatedDirac, Uniform, UniformFamily};
pub use mass::{MassProfile, Scaled};
pub use spec::MeasureSpec;
pub use table1::{make_table1_measure, PenaltyKind, Table1Measure};

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::batch::Batch;
use crate::error::{Error, Result};
use crate::par;

/// Default tolerance of the approximate support test.
pub const SUPPORT_TOL: f64 = 1e-6;

/// Relative step of the finite-difference fallback.
pub const FD_REL_STEP: f64 = 1e-4;

/// A point `(ψ, θ)` in parameter space.
#[derive(Debug, Clone, Copy)]
pub struct Params<'a> {
    pub psi: &'a [f64],
    pub theta: &'a [f64],
}

impl<'a> Params<'a> {
    pub fn new(psi: &'a [f64], theta: &'a [f64]) -> Self {
        Params { psi, theta }
    }

    pub fn get(&self, idx: ParamIndex) -> f64 {
        match idx {
            ParamIndex::Psi(i) => self.psi[i],
            ParamIndex::Theta(i) => self.theta[i],
        }
    }

    /// Owned copy with one component shifted by `delta`.
    pub fn shifted(&self, idx: ParamIndex, delta: f64) -> OwnedParams {
        let mut out = OwnedParams::from(*self);
        match idx {
            ParamIndex::Psi(i) => out.psi[i] += delta,
            ParamIndex::Theta(i) => out.theta[i] += delta,
        }
        out
    }

    pub fn flat(&self) -> Vec<f64> {
        self.psi.iter().chain(self.theta).copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OwnedParams {
    pub psi: Vec<f64>,
    pub theta: Vec<f64>,
}

impl OwnedParams {
    pub fn view(&self) -> Params<'_> {
        Params::new(&self.psi, &self.theta)
    }
}

impl From<Params<'_>> for OwnedParams {
    fn from(p: Params<'_>) -> Self {
        OwnedParams {
            psi: p.psi.to_vec(),
            theta: p.theta.to_vec(),
        }
    }
}

/// Component of `(ψ, θ)` a derivative is taken with respect to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamIndex {
    Psi(usize),
    Theta(usize),
}

impl fmt::Display for ParamIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamIndex::Psi(i) => write!(f, "psi[{i}]"),
            ParamIndex::Theta(i) => write!(f, "theta[{i}]"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dependence {
    pub psi: bool,
    pub theta: bool,
}

impl Dependence {
    pub const NONE: Dependence = Dependence { psi: false, theta: false };

    pub fn on(&self, idx: ParamIndex) -> bool {
        match idx {
            ParamIndex::Psi(_) => self.psi,
            ParamIndex::Theta(_) => self.theta,
        }
    }

    pub fn union(self, other: Dependence) -> Dependence {
        Dependence {
            psi: self.psi || other.psi,
            theta: self.theta || other.theta,
        }
    }
}

/// Weak derivative `c (P⁺ − P⁻)` of a parametric probability measure.
///
/// `plus` and `minus` are probability measures frozen at the parameter where
/// the triple was taken. Representations are not unique; only the integrals
/// they produce matter.
#[derive(Debug, Clone)]
pub struct WeakDerivativeTriple {
    pub c: f64,
    pub plus: Arc<dyn FiniteMeasure>,
    pub minus: Arc<dyn FiniteMeasure>,
}

/// A finite measure `μ_{ψ,θ} = M(ψ,θ) μ̄_{ψ,θ}` on a `dim`-dimensional space.
pub trait FiniteMeasure: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    /// Dimension of the sample space.
    fn dim(&self) -> usize;

    /// Total mass `M(ψ, θ)`.
    fn mass(&self, p: Params<'_>) -> f64;

    /// `n` draws from the normalized measure. Identical arguments must give
    /// identical batches.
    fn sample(&self, p: Params<'_>, n: usize, seed: u64) -> Batch;

    /// Approximate support membership: distance to the support at most `tol`.
    fn contains(&self, x: &[f64], p: Params<'_>, tol: f64) -> bool;

    fn dependence(&self) -> Dependence;

    /// Single atom when the normalized measure is a point mass.
    fn atom(&self, _p: Params<'_>) -> Option<Vec<f64>> {
        None
    }

    /// `∂M/∂(component)`. The default is a central difference of the mass.
    fn mass_partial(&self, p: Params<'_>, idx: ParamIndex) -> f64 {
        if !self.dependence().on(idx) {
            return 0.0;
        }
        let h = 1e-6 * p.get(idx).abs().max(1.0);
        let up = self.mass(p.shifted(idx, h).view());
        let down = self.mass(p.shifted(idx, -h).view());
        (up - down) / (2.0 * h)
    }

    /// Weak derivative of the normalized part. `Ok(None)` means the
    /// normalized measure does not depend on that component.
    fn weak_derivative(
        &self,
        p: Params<'_>,
        idx: ParamIndex,
    ) -> Result<Option<WeakDerivativeTriple>>;
}

/// Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// How `differentiate_expectation` obtains the derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DiffMethod {
    /// Weak-derivative triple; fails with `NoWeakDerivative` if there is none.
    Analytic,
    /// Central difference of `expect` with common random numbers.
    FiniteDifference,
    /// Analytic when available, finite difference otherwise.
    #[default]
    Auto,
}

fn evaluate<F>(batch: &Batch, phi: &F, context: &str) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let values = par::map_range(batch.len(), |i| phi(batch.row(i)));
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::numerical(context, batch.row(i)));
    }
    Ok(values)
}

/// `∫ φ dμ` as mass times the sample mean over `n` normalized draws.
pub fn expect<F>(
    measure: &dyn FiniteMeasure,
    p: Params<'_>,
    phi: F,
    n: usize,
    seed: u64,
) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    expect_with_error(measure, p, phi, n, seed).map(|e| e.value)
}

pub fn expect_with_error<F>(
    measure: &dyn FiniteMeasure,
    p: Params<'_>,
    phi: F,
    n: usize,
    seed: u64,
) -> Result<Estimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if n == 0 {
        return Err(Error::config("expectation needs at least one sample"));
    }
    let mass = measure.mass(p);
    if !mass.is_finite() {
        return Err(Error::numerical(
            format!("mass of {}", measure.name()),
            &p.flat(),
        ));
    }
    let batch = measure.sample(p, n, seed);
    let values = evaluate(&batch, &phi, &format!("integrand over {}", measure.name()))?;
    Ok(mass_scaled_mean(mass, &values))
}

pub(crate) fn mass_scaled_mean(mass: f64, values: &[f64]) -> Estimate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Estimate {
        value: mass * mean,
        std_error: mass.abs() * (var / n).sqrt(),
    }
}

/// `d/d(component) ∫ φ dμ_{ψ,θ}` for an integrand that does not itself
/// depend on the parameter.
pub fn differentiate_expectation<F>(
    measure: &dyn FiniteMeasure,
    p: Params<'_>,
    phi: F,
    idx: ParamIndex,
    n: usize,
    seed: u64,
    method: DiffMethod,
) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if !measure.dependence().on(idx) {
        return Ok(0.0);
    }
    match method {
        DiffMethod::Analytic => analytic_derivative(measure, p, &phi, idx, n, seed),
        DiffMethod::FiniteDifference => fd_derivative(measure, p, &phi, idx, n, seed),
        DiffMethod::Auto => match analytic_derivative(measure, p, &phi, idx, n, seed) {
            Err(Error::NoWeakDerivative { .. }) => fd_derivative(measure, p, &phi, idx, n, seed),
            other => other,
        },
    }
}

fn analytic_derivative<F>(
    measure: &dyn FiniteMeasure,
    p: Params<'_>,
    phi: &F,
    idx: ParamIndex,
    n: usize,
    seed: u64,
) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let triple = measure.weak_derivative(p, idx)?;
    let mass = measure.mass(p);
    let mass_grad = measure.mass_partial(p, idx);
    let mut out = 0.0;
    if mass_grad != 0.0 {
        out += mass_grad * normalized_mean(measure, p, phi, n, seed)?;
    }
    if let Some(t) = triple {
        if t.c != 0.0 {
            let plus = expect(t.plus.as_ref(), p, phi, n, seed)?;
            let minus = expect(t.minus.as_ref(), p, phi, n, seed)?;
            out += mass * t.c * (plus - minus);
        }
    }
    Ok(out)
}

/// `E_{μ̄}[φ]`, the expectation under the normalized measure. Well defined
/// even where the mass vanishes.
pub fn normalized_mean<F>(
    measure: &dyn FiniteMeasure,
    p: Params<'_>,
    phi: &F,
    n: usize,
    seed: u64,
) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if n == 0 {
        return Err(Error::config("expectation needs at least one sample"));
    }
    let batch = measure.sample(p, n, seed);
    let values = evaluate(&batch, phi, &format!("integrand over {}", measure.name()))?;
    Ok(mass_scaled_mean(1.0, &values).value)
}

fn fd_derivative<F>(
    measure: &dyn FiniteMeasure,
    p: Params<'_>,
    phi: &F,
    idx: ParamIndex,
    n: usize,
    seed: u64,
) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let h = FD_REL_STEP * p.get(idx).abs().max(1.0);
    let up = p.shifted(idx, h);
    let down = p.shifted(idx, -h);
    let e_up = expect(measure, up.view(), phi, n, seed)?;
    let e_down = expect(measure, down.view(), phi, n, seed)?;
    Ok((e_up - e_down) / (2.0 * h))
}

/// Adapter handing a second-moment callable `θ ↦ E_{μ_θ}[x²]` to the toy
/// systems.
pub fn second_moment_fn(
    measure: Arc<dyn FiniteMeasure>,
    n: usize,
    seed: u64,
) -> impl Fn(f64) -> f64 + Send + Sync {
    move |theta: f64| {
        let t = [theta];
        let p = Params::new(&[], &t);
        expect(measure.as_ref(), p, |x| x.iter().map(|v| v * v).sum(), n, seed)
            .unwrap_or(f64::NAN)
    }
}
