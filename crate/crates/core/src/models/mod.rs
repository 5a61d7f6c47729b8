//! Differentiable discriminators `D(x; ψ)` and generators `G(z; θ)`.
//!
//! Everything works on batches. Besides values and first derivatives, a
//! discriminator exposes the contraction `Σᵢ wᵢ ∇_{ψx}D(xᵢ) vᵢ` of its mixed
//! second derivative, which is what the gradient of a squared-gradient
//! penalty needs.

mod mlp;

pub use mlp::{DualTape, Mlp, Tape};

use std::fmt::Debug;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::batch::Batch;
use crate::error::Result;
use crate::measure::{Dependence, FiniteMeasure, ParamIndex, Params, WeakDerivativeTriple};
use crate::rng::{stream_rng, streams};

pub trait Discriminator: Send + Sync + Debug {
    fn input_dim(&self) -> usize;
    fn num_params(&self) -> usize;

    fn value(&self, x: &Batch, psi: &[f64]) -> Vec<f64>;

    /// Per-sample `∇_x D(xᵢ; ψ)`.
    fn grad_x(&self, x: &Batch, psi: &[f64]) -> Batch;

    /// `Σᵢ wᵢ ∇_ψ D(xᵢ; ψ)`.
    fn grad_psi(&self, x: &Batch, psi: &[f64], weights: &[f64]) -> Vec<f64>;

    /// `Σᵢ wᵢ ∇_{ψx} D(xᵢ; ψ) vᵢ`, i.e. the ψ-gradient of `Σᵢ wᵢ ∇_x D(xᵢ)·vᵢ`
    /// with the directions `vᵢ` held fixed.
    fn mixed(&self, x: &Batch, psi: &[f64], v: &Batch, weights: &[f64]) -> Vec<f64>;

    /// Squared gradient norms `‖∇_x D(xᵢ)‖²` and `Σᵢ wᵢ ∇_ψ ‖∇_x D(xᵢ)‖²`.
    fn grad_norm_sq_and_psi_grad(&self, x: &Batch, psi: &[f64], weights: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let g = self.grad_x(x, psi);
        let norms = g.rows().map(|r| r.iter().map(|v| v * v).sum()).collect();
        let w2: Vec<f64> = weights.iter().map(|w| 2.0 * w).collect();
        (norms, self.mixed(x, psi, &g, &w2))
    }

    /// Full `dim(ψ) × dim(x)` matrix `∇_{ψx} D` at one point, column by column.
    fn mixed_matrix(&self, x: &[f64], psi: &[f64]) -> nalgebra::DMatrix<f64> {
        let d = self.input_dim();
        let xb = Batch::new(d, x.to_vec());
        let mut m = nalgebra::DMatrix::zeros(self.num_params(), d);
        for k in 0..d {
            let mut e = vec![0.0; d];
            e[k] = 1.0;
            let col = self.mixed(&xb, psi, &Batch::new(d, e), &[1.0]);
            m.set_column(k, &nalgebra::DVector::from_vec(col));
        }
        m
    }
}

pub trait Generator: Send + Sync + Debug {
    fn latent_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn num_params(&self) -> usize;

    fn generate(&self, z: &Batch, theta: &[f64]) -> Batch;

    /// `Σᵢ J_θG(zᵢ)ᵀ cᵢ`.
    fn vjp(&self, z: &Batch, theta: &[f64], cotangent: &Batch) -> Vec<f64>;

    /// Per-sample `J_θG(zᵢ) d`.
    fn jvp(&self, z: &Batch, theta: &[f64], direction: &[f64]) -> Batch;

    /// Output when it does not depend on the latent draw.
    fn atom(&self, _theta: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

/// `D(x; ψ) = ψ · x`.
#[derive(Debug, Clone)]
pub struct LinearDiscriminator {
    pub dim: usize,
}

impl Discriminator for LinearDiscriminator {
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn num_params(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &Batch, psi: &[f64]) -> Vec<f64> {
        x.rows().map(|r| dot(r, psi)).collect()
    }
    fn grad_x(&self, x: &Batch, psi: &[f64]) -> Batch {
        Batch::repeat(psi, x.len())
    }
    fn grad_psi(&self, x: &Batch, _psi: &[f64], weights: &[f64]) -> Vec<f64> {
        weighted_row_sum(x, weights)
    }
    fn mixed(&self, _x: &Batch, _psi: &[f64], v: &Batch, weights: &[f64]) -> Vec<f64> {
        weighted_row_sum(v, weights)
    }
}

/// `D(x; ψ) = ψ ‖x‖²` with scalar ψ.
#[derive(Debug, Clone)]
pub struct QuadraticDiscriminator {
    pub dim: usize,
}

impl Discriminator for QuadraticDiscriminator {
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn num_params(&self) -> usize {
        1
    }
    fn value(&self, x: &Batch, psi: &[f64]) -> Vec<f64> {
        x.rows().map(|r| psi[0] * dot(r, r)).collect()
    }
    fn grad_x(&self, x: &Batch, psi: &[f64]) -> Batch {
        Batch::new(x.dim(), x.as_slice().iter().map(|v| 2.0 * psi[0] * v).collect())
    }
    fn grad_psi(&self, x: &Batch, _psi: &[f64], weights: &[f64]) -> Vec<f64> {
        vec![x.rows().zip(weights).map(|(r, w)| w * dot(r, r)).sum()]
    }
    fn mixed(&self, x: &Batch, _psi: &[f64], v: &Batch, weights: &[f64]) -> Vec<f64> {
        vec![x.rows().zip(v.rows()).zip(weights).map(|((r, d), w)| 2.0 * w * dot(r, d)).sum()]
    }
}

/// Scalar-output tanh MLP discriminator.
#[derive(Debug, Clone)]
pub struct MlpDiscriminator {
    pub net: Mlp,
}

impl MlpDiscriminator {
    pub fn new(input: usize, hidden: &[usize]) -> Self {
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        MlpDiscriminator { net: Mlp::new(sizes) }
    }
}

impl Discriminator for MlpDiscriminator {
    fn input_dim(&self) -> usize {
        self.net.input_dim()
    }
    fn num_params(&self) -> usize {
        self.net.num_params()
    }
    fn value(&self, x: &Batch, psi: &[f64]) -> Vec<f64> {
        self.net.output(&self.net.forward(psi, x)).into_vec()
    }
    fn grad_x(&self, x: &Batch, psi: &[f64]) -> Batch {
        let tape = self.net.forward(psi, x);
        self.net.backward(psi, &tape, &Batch::new(1, vec![1.0; x.len()]), None)
    }
    fn grad_psi(&self, x: &Batch, psi: &[f64], weights: &[f64]) -> Vec<f64> {
        let tape = self.net.forward(psi, x);
        let mut g = vec![0.0; self.num_params()];
        self.net.backward(psi, &tape, &Batch::new(1, weights.to_vec()), Some(&mut g));
        g
    }
    fn mixed(&self, x: &Batch, psi: &[f64], v: &Batch, weights: &[f64]) -> Vec<f64> {
        let tape = self.net.forward_dual(psi, x, v, None);
        let mut g = vec![0.0; self.num_params()];
        self.net.backward_dual_param_tangent(psi, &tape, &Batch::new(1, weights.to_vec()), &mut g);
        g
    }
    fn grad_norm_sq_and_psi_grad(&self, x: &Batch, psi: &[f64], weights: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let tape = self.net.forward(psi, x);
        let gx = self.net.backward(psi, &tape, &Batch::new(1, vec![1.0; x.len()]), None);
        let norms = gx.rows().map(|r| dot(r, r)).collect();
        let dual = self.net.tangent_pass(psi, tape, &gx, None);
        let mut g = vec![0.0; self.num_params()];
        let w2 = weights.iter().map(|w| 2.0 * w).collect();
        self.net.backward_dual_param_tangent(psi, &dual, &Batch::new(1, w2), &mut g);
        (norms, g)
    }
}

/// `G(z; θ) = θ`: the generator distribution is `δ_θ`.
#[derive(Debug, Clone)]
pub struct DiracGenerator {
    pub dim: usize,
}

impl Generator for DiracGenerator {
    fn latent_dim(&self) -> usize {
        1
    }
    fn output_dim(&self) -> usize {
        self.dim
    }
    fn num_params(&self) -> usize {
        self.dim
    }
    fn generate(&self, z: &Batch, theta: &[f64]) -> Batch {
        Batch::repeat(theta, z.len())
    }
    fn vjp(&self, _z: &Batch, _theta: &[f64], cotangent: &Batch) -> Vec<f64> {
        weighted_row_sum(cotangent, &vec![1.0; cotangent.len()])
    }
    fn jvp(&self, z: &Batch, _theta: &[f64], direction: &[f64]) -> Batch {
        Batch::repeat(direction, z.len())
    }
    fn atom(&self, theta: &[f64]) -> Option<Vec<f64>> {
        Some(theta.to_vec())
    }
}

/// `G(z; θ) = θ z` with scalar θ; with `z ~ U(−1,1)` this gives `U(−|θ|,|θ|)`.
#[derive(Debug, Clone)]
pub struct ScaleGenerator {
    pub dim: usize,
}

impl Generator for ScaleGenerator {
    fn latent_dim(&self) -> usize {
        self.dim
    }
    fn output_dim(&self) -> usize {
        self.dim
    }
    fn num_params(&self) -> usize {
        1
    }
    fn generate(&self, z: &Batch, theta: &[f64]) -> Batch {
        Batch::new(z.dim(), z.as_slice().iter().map(|v| theta[0] * v).collect())
    }
    fn vjp(&self, z: &Batch, _theta: &[f64], cotangent: &Batch) -> Vec<f64> {
        vec![z.rows().zip(cotangent.rows()).map(|(a, b)| dot(a, b)).sum()]
    }
    fn jvp(&self, z: &Batch, _theta: &[f64], direction: &[f64]) -> Batch {
        Batch::new(z.dim(), z.as_slice().iter().map(|v| direction[0] * v).collect())
    }
    fn atom(&self, theta: &[f64]) -> Option<Vec<f64>> {
        (theta[0] == 0.0).then(|| vec![0.0; self.dim])
    }
}

/// Tanh MLP generator.
#[derive(Debug, Clone)]
pub struct MlpGenerator {
    pub net: Mlp,
}

impl MlpGenerator {
    pub fn new(latent: usize, hidden: &[usize], output: usize) -> Self {
        let mut sizes = vec![latent];
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        MlpGenerator { net: Mlp::new(sizes) }
    }
}

impl Generator for MlpGenerator {
    fn latent_dim(&self) -> usize {
        self.net.input_dim()
    }
    fn output_dim(&self) -> usize {
        self.net.output_dim()
    }
    fn num_params(&self) -> usize {
        self.net.num_params()
    }
    fn generate(&self, z: &Batch, theta: &[f64]) -> Batch {
        self.net.output(&self.net.forward(theta, z))
    }
    fn vjp(&self, z: &Batch, theta: &[f64], cotangent: &Batch) -> Vec<f64> {
        let tape = self.net.forward(theta, z);
        let mut g = vec![0.0; self.num_params()];
        self.net.backward(theta, &tape, cotangent, Some(&mut g));
        g
    }
    fn jvp(&self, z: &Batch, theta: &[f64], direction: &[f64]) -> Batch {
        let zero = Batch::zeros(z.dim(), z.len());
        let tape = self.net.forward_dual(theta, z, &zero, Some(direction));
        self.net.output_tangent(&tape)
    }
}

/// Standard normal distribution on `R^dim`.
#[derive(Debug, Clone)]
pub struct StandardGaussian {
    pub dim: usize,
}

impl FiniteMeasure for StandardGaussian {
    fn name(&self) -> String {
        format!("normal({})", self.dim)
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn mass(&self, _p: Params<'_>) -> f64 {
        1.0
    }
    fn sample(&self, _p: Params<'_>, n: usize, seed: u64) -> Batch {
        let mut rng = stream_rng(seed, streams::MEASURE);
        Batch::new(self.dim, (0..n * self.dim).map(|_| rng.sample(StandardNormal)).collect())
    }
    fn contains(&self, _x: &[f64], _p: Params<'_>, _tol: f64) -> bool {
        true
    }
    fn dependence(&self) -> Dependence {
        Dependence::NONE
    }
    fn weak_derivative(&self, _p: Params<'_>, _idx: ParamIndex) -> Result<Option<WeakDerivativeTriple>> {
        Ok(None)
    }
}

/// Distribution of `G(z; θ)` for `z` drawn from `latent`.
#[derive(Debug, Clone)]
pub struct PushForward {
    pub generator: Arc<dyn Generator>,
    pub latent: Arc<dyn FiniteMeasure>,
}

impl FiniteMeasure for PushForward {
    fn name(&self) -> String {
        format!("G#{}", self.latent.name())
    }
    fn dim(&self) -> usize {
        self.generator.output_dim()
    }
    fn mass(&self, _p: Params<'_>) -> f64 {
        1.0
    }
    fn sample(&self, p: Params<'_>, n: usize, seed: u64) -> Batch {
        self.generator.generate(&self.latent.sample(p, n, seed), p.theta)
    }
    fn contains(&self, x: &[f64], p: Params<'_>, tol: f64) -> bool {
        match self.generator.atom(p.theta) {
            Some(a) => a.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() <= tol,
            None => true,
        }
    }
    fn dependence(&self) -> Dependence {
        Dependence { psi: false, theta: true }
    }
    fn atom(&self, p: Params<'_>) -> Option<Vec<f64>> {
        self.generator.atom(p.theta)
    }
    fn weak_derivative(&self, _p: Params<'_>, idx: ParamIndex) -> Result<Option<WeakDerivativeTriple>> {
        match idx {
            ParamIndex::Psi(_) => Ok(None),
            ParamIndex::Theta(_) => Err(crate::Error::NoWeakDerivative {
                measure: self.name(),
                component: idx.to_string(),
            }),
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn weighted_row_sum(x: &Batch, weights: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.dim()];
    for (row, w) in x.rows().zip(weights) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += w * v;
        }
    }
    out
}

#[cfg(test)]
mod tests;
