//! Flat-state vector fields shared by the Jacobian estimator and the
//! integrators.

use crate::analytic::ToySystem2D;
use crate::error::{Error, Result};

/// `x ↦ ẋ` on `R^dim`. Stochastic fields read their random numbers from
/// `seed`; deterministic fields ignore it.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64], seed: u64) -> Result<Vec<f64>>;
}

/// Deterministic field backed by a closure.
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnField { dim, f }
    }
}

impl<F> VectorField for FnField<F>
where
    F: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64], _seed: u64) -> Result<Vec<f64>> {
        let v = (self.f)(x);
        check_finite(&v, x, "vector field")?;
        Ok(v)
    }
}

impl VectorField for ToySystem2D {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, x: &[f64], _seed: u64) -> Result<Vec<f64>> {
        let (a, b) = ToySystem2D::eval(self, x[0], x[1]);
        let v = vec![a, b];
        check_finite(&v, x, &self.name)?;
        Ok(v)
    }
}

impl<T: VectorField + ?Sized> VectorField for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn eval(&self, x: &[f64], seed: u64) -> Result<Vec<f64>> {
        (**self).eval(x, seed)
    }
}

pub(crate) fn check_finite(v: &[f64], at: &[f64], context: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::numerical(context, at))
    }
}
