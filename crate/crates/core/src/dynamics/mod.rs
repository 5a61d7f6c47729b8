//! The SGP μ-WGAN as an autonomous system on `(ψ, θ)`:
//!
//! ```text
//! ψ̇ = E_{p_d}[∇_ψ D] − E_{p_θ}[∇_ψ D] − (ρ/2) ∇_ψ E_μ[‖∇_x D‖²]
//! θ̇ = ∇_θ E_{p_θ}[D] = E_z[∇_θ G(z;θ)ᵀ ∇_x D(G(z;θ); ψ)]
//! ```
//!
//! All expectations are Monte-Carlo estimates. Within one call the data
//! draws, latent draws and penalty draws come from fixed streams of the
//! supplied seed, so the penalty measures built from `x_d` and `x_g` reuse
//! exactly the points the other two expectations see.

mod assumptions;

pub use assumptions::{check_assumptions, AssumptionCheck, AssumptionConfig, AssumptionReport, Verdict, Witness};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::batch::Batch;
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::measure::{
    self, make_table1_measure, Discrete, DiffMethod, FiniteMeasure, MassProfile, ParamIndex, Params,
    PenaltyKind, Scaled, Uniform,
};
use crate::models::{
    DiracGenerator, Discriminator, Generator, LinearDiscriminator, PushForward, QuadraticDiscriminator,
    ScaleGenerator,
};
use crate::rng::{child_seed, streams};

/// Monte-Carlo budget of one drift evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub n: usize,
    pub seed: u64,
}

impl McConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        McConfig { n, seed }
    }
}

/// `(D, p_d, p_θ, μ)` with penalty weight ρ, `p_θ` given as the push-forward
/// of `latent` through the generator.
#[derive(Debug, Clone)]
pub struct SgpProblem {
    pub discriminator: Arc<dyn Discriminator>,
    pub generator: Arc<dyn Generator>,
    pub data: Arc<dyn FiniteMeasure>,
    pub latent: Arc<dyn FiniteMeasure>,
    pub penalty: Arc<dyn FiniteMeasure>,
    pub rho: f64,
}

/// Drift `(ψ̇, θ̇)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub psi: Vec<f64>,
    pub theta: Vec<f64>,
}

impl Drift {
    pub fn flat(&self) -> Vec<f64> {
        self.psi.iter().chain(&self.theta).copied().collect()
    }
}

impl SgpProblem {
    pub fn new(
        discriminator: Arc<dyn Discriminator>,
        generator: Arc<dyn Generator>,
        data: Arc<dyn FiniteMeasure>,
        latent: Arc<dyn FiniteMeasure>,
        penalty: Arc<dyn FiniteMeasure>,
        rho: f64,
    ) -> Result<Self> {
        // ρ = 0 is admitted for the unpenalized reference dynamics.
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(Error::config(format!("penalty weight must be finite and >= 0, got {rho}")));
        }
        let x_dim = discriminator.input_dim();
        if data.dim() != x_dim || generator.output_dim() != x_dim || penalty.dim() != x_dim {
            return Err(Error::config("data, generator and penalty must live in the discriminator's input space"));
        }
        if latent.dim() != generator.latent_dim() {
            return Err(Error::config("latent distribution does not match the generator"));
        }
        Ok(SgpProblem { discriminator, generator, data, latent, penalty, rho })
    }

    pub fn with_penalty(&self, penalty: Arc<dyn FiniteMeasure>) -> Result<Self> {
        let mut p = self.clone();
        if penalty.dim() != self.discriminator.input_dim() {
            return Err(Error::config("penalty measure dimension mismatch"));
        }
        p.penalty = penalty;
        Ok(p)
    }

    pub fn with_rho(&self, rho: f64) -> Result<Self> {
        SgpProblem::new(
            self.discriminator.clone(),
            self.generator.clone(),
            self.data.clone(),
            self.latent.clone(),
            self.penalty.clone(),
            rho,
        )
    }

    pub fn psi_dim(&self) -> usize {
        self.discriminator.num_params()
    }

    pub fn theta_dim(&self) -> usize {
        self.generator.num_params()
    }

    /// `p_θ` as a measure.
    pub fn model_distribution(&self) -> Arc<dyn FiniteMeasure> {
        Arc::new(PushForward { generator: self.generator.clone(), latent: self.latent.clone() })
    }

    /// One of the five penalty measures over this problem's `p_d` and `p_θ`.
    pub fn table1_penalty(&self, kind: PenaltyKind, anchor: Option<Vec<f64>>) -> Result<Arc<dyn FiniteMeasure>> {
        Ok(Arc::new(make_table1_measure(kind, anchor, self.data.clone(), self.model_distribution())?))
    }

    /// Draws of one drift evaluation: data, latent, generated points.
    pub fn draws(&self, psi: &[f64], theta: &[f64], mc: McConfig) -> (Batch, Batch, Batch) {
        let p = Params::new(psi, theta);
        let x_d = self.data.sample(p, mc.n, child_seed(mc.seed, streams::DATA));
        let z = self.latent.sample(p, mc.n, child_seed(mc.seed, streams::LATENT));
        let x_g = self.generator.generate(&z, theta);
        (x_d, z, x_g)
    }

    fn check_params(&self, psi: &[f64], theta: &[f64], mc: McConfig) -> Result<()> {
        if psi.len() != self.psi_dim() || theta.len() != self.theta_dim() {
            return Err(Error::config(format!(
                "parameter dimensions ({}, {}) do not match problem ({}, {})",
                psi.len(),
                theta.len(),
                self.psi_dim(),
                self.theta_dim()
            )));
        }
        if mc.n == 0 {
            return Err(Error::config("Monte-Carlo sample count must be at least 1"));
        }
        Ok(())
    }
}

fn finite_or_fail(v: &[f64], context: &str, psi: &[f64], theta: &[f64]) -> Result<()> {
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        let point: Vec<f64> = psi.iter().chain(theta).copied().collect();
        return Err(Error::numerical(format!("{context} (component {i})"), &point));
    }
    Ok(())
}

/// `∇_ψ E_μ[‖∇_x D(x;ψ)‖²]` at `(ψ, θ)`.
///
/// The integrand's own ψ-dependence goes through the mixed second derivative
/// of the discriminator; if μ itself depends on ψ the product-rule term
/// `∫ ‖∇_x D‖² dμ'` is added via [`measure::differentiate_expectation`].
pub fn penalty_gradient(problem: &SgpProblem, psi: &[f64], theta: &[f64], mc: McConfig) -> Result<Vec<f64>> {
    problem.check_params(psi, theta, mc)?;
    let p = Params::new(psi, theta);
    let mu = problem.penalty.as_ref();
    let mass = mu.mass(p);
    if !(mass >= 0.0) || !mass.is_finite() {
        return Err(Error::InvalidMeasure { mass, point: p.flat() });
    }
    let x_hat = mu.sample(p, mc.n, mc.seed);
    let weights = vec![1.0 / mc.n as f64; mc.n];
    let (_, mut grad) = problem.discriminator.grad_norm_sq_and_psi_grad(&x_hat, psi, &weights);
    for g in grad.iter_mut() {
        *g *= mass;
    }
    if mu.dependence().psi {
        let d = problem.discriminator.as_ref();
        let phi = |x: &[f64]| {
            let g = d.grad_x(&Batch::new(x.len(), x.to_vec()), psi);
            g.as_slice().iter().map(|v| v * v).sum::<f64>()
        };
        for (j, g) in grad.iter_mut().enumerate() {
            *g += measure::differentiate_expectation(mu, p, phi, ParamIndex::Psi(j), mc.n, mc.seed, DiffMethod::Auto)?;
        }
    }
    finite_or_fail(&grad, "penalty gradient", psi, theta)?;
    Ok(grad)
}

/// Monte-Carlo estimate of the penalty value `E_μ[‖∇_x D‖²]`.
pub fn penalty_value(problem: &SgpProblem, psi: &[f64], theta: &[f64], mc: McConfig) -> Result<f64> {
    problem.check_params(psi, theta, mc)?;
    let p = Params::new(psi, theta);
    let x_hat = problem.penalty.sample(p, mc.n, mc.seed);
    let g = problem.discriminator.grad_x(&x_hat, psi);
    let mean = g.rows().map(|r| r.iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / mc.n as f64;
    Ok(problem.penalty.mass(p) * mean)
}

/// Both drifts at `(ψ, θ)`.
pub fn vector_field(problem: &SgpProblem, psi: &[f64], theta: &[f64], mc: McConfig) -> Result<Drift> {
    problem.check_params(psi, theta, mc)?;
    let d = problem.discriminator.as_ref();
    let (x_d, z, x_g) = problem.draws(psi, theta, mc);
    let w = vec![1.0 / mc.n as f64; mc.n];

    let mut psi_dot = d.grad_psi(&x_d, psi, &w);
    let fake = d.grad_psi(&x_g, psi, &w);
    for (a, b) in psi_dot.iter_mut().zip(&fake) {
        *a -= b;
    }
    if problem.rho != 0.0 {
        let pen = penalty_gradient(problem, psi, theta, mc)?;
        for (a, b) in psi_dot.iter_mut().zip(&pen) {
            *a -= 0.5 * problem.rho * b;
        }
    }
    finite_or_fail(&psi_dot, "discriminator drift", psi, theta)?;

    let gx = d.grad_x(&x_g, psi);
    let cot = Batch::new(gx.dim(), gx.as_slice().iter().map(|v| v / mc.n as f64).collect());
    let theta_dot = problem.generator.vjp(&z, theta, &cot);
    finite_or_fail(&theta_dot, "generator drift", psi, theta)?;
    Ok(Drift { psi: psi_dot, theta: theta_dot })
}

/// Batch-means standard error of each drift component: the budget is split
/// into `groups` independent sub-estimates.
pub fn drift_std_error(problem: &SgpProblem, psi: &[f64], theta: &[f64], mc: McConfig, groups: usize) -> Result<Vec<f64>> {
    let groups = groups.max(2);
    let sub = McConfig::new((mc.n / groups).max(1), 0);
    let draws = crate::par::map_range(groups, |g| {
        vector_field(problem, psi, theta, McConfig { seed: child_seed(mc.seed, 1000 + g as u64), ..sub })
            .map(|d| d.flat())
    });
    let draws: Vec<Vec<f64>> = draws.into_iter().collect::<Result<_>>()?;
    let k = draws.len() as f64;
    let dim = draws[0].len();
    Ok((0..dim)
        .map(|i| {
            let mean = draws.iter().map(|d| d[i]).sum::<f64>() / k;
            let var = draws.iter().map(|d| (d[i] - mean).powi(2)).sum::<f64>() / (k - 1.0);
            // scale the group spread down to the full budget
            (var / k).sqrt()
        })
        .collect())
}

/// The drift as a flat field on `[ψ; θ]`. The seed passed to `eval`
/// replaces the configured one.
#[derive(Debug, Clone)]
pub struct SgpField {
    pub problem: SgpProblem,
    pub n: usize,
}

impl VectorField for SgpField {
    fn dim(&self) -> usize {
        self.problem.psi_dim() + self.problem.theta_dim()
    }

    fn eval(&self, x: &[f64], seed: u64) -> Result<Vec<f64>> {
        let (psi, theta) = x.split_at(self.problem.psi_dim());
        vector_field(&self.problem, psi, theta, McConfig::new(self.n, seed)).map(|d| d.flat())
    }
}

/// Dirac GAN `(ψx, δ₀, δ_θ, M·δ₀)`.
pub fn dirac_problem(rho: f64, mass: MassProfile) -> Result<SgpProblem> {
    let origin: Arc<dyn FiniteMeasure> = Arc::new(Discrete::dirac(vec![0.0], 1.0));
    let penalty: Arc<dyn FiniteMeasure> = match mass {
        MassProfile::Constant(c) => Arc::new(Discrete::dirac(vec![0.0], c)),
        profile => Arc::new(Scaled::new(origin.clone(), profile)),
    };
    SgpProblem::new(
        Arc::new(LinearDiscriminator { dim: 1 }),
        Arc::new(DiracGenerator { dim: 1 }),
        origin.clone(),
        origin,
        penalty,
        rho,
    )
}

/// Quadratic GAN `(ψx², U(−1,1), U(−|θ|,|θ|), μ)`, with `p_θ` realized as
/// `θz`, `z ~ U(−1,1)`. The default penalty is `U(−|θ|,|θ|)`.
pub fn quadratic_problem(rho: f64, penalty: Option<Arc<dyn FiniteMeasure>>) -> Result<SgpProblem> {
    let unit: Arc<dyn FiniteMeasure> = Arc::new(Uniform::fixed(-1.0, 1.0));
    let penalty = penalty.unwrap_or_else(|| Arc::new(Uniform::symmetric_theta(0)));
    SgpProblem::new(
        Arc::new(QuadraticDiscriminator { dim: 1 }),
        Arc::new(ScaleGenerator { dim: 1 }),
        unit.clone(),
        unit,
        penalty,
        rho,
    )
}

/// Quadratic Dirac GAN `(ψx², δ₀, δ_θ, μ_GP)`.
pub fn quadratic_dirac_problem(rho: f64) -> Result<SgpProblem> {
    let origin: Arc<dyn FiniteMeasure> = Arc::new(Discrete::dirac(vec![0.0], 1.0));
    let base = SgpProblem::new(
        Arc::new(QuadraticDiscriminator { dim: 1 }),
        Arc::new(DiracGenerator { dim: 1 }),
        origin.clone(),
        origin.clone(),
        origin,
        rho,
    )?;
    let gp = base.table1_penalty(PenaltyKind::Gp, None)?;
    base.with_penalty(gp)
}

#[cfg(test)]
mod tests;
