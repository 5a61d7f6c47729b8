//! Numerical laboratory for Wasserstein GANs trained with a simple
//! (zero-centered, squared) gradient penalty on an arbitrary finite penalty
//! measure, viewed as a continuous dynamic system on discriminator
//! parameters ψ and generator parameters θ.

pub mod analytic;
pub mod batch;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod gan2d;
pub mod integrate;
pub mod linalg;
pub mod measure;
pub mod models;
pub mod par;
pub mod problems;
pub mod rng;
pub mod stability;
pub mod svg;

pub use batch::Batch;
pub use error::{Error, Result};
