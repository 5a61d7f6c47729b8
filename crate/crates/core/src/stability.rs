//! Linear stability of the drift at an equilibrium: finite-difference
//! Jacobians, eigenvalue verdicts, and the block structure
//!
//! ```text
//! J = [[−ρQ, −R], [Rᵀ, 0]],   Q = E_μ[∇_ψx D ∇_ψx Dᵀ],   R = ∇_θ E_{p_θ}[∇_ψ D]
//! ```
//!
//! that the drift Jacobian takes at a realizable equilibrium.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{McConfig, SgpField, SgpProblem};
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::linalg::{self, MAX_DENSE_DIM};
use crate::measure::Params;

/// Real-part tolerance separating stable, marginal and unstable spectra.
pub const SPECTRUM_TOL: f64 = 1e-7;
/// Eigenvalues below this fraction of the largest one span the nullspace.
pub const NULLSPACE_REL: f64 = 1e-6;
/// Absolute floor under the relative nullspace cut, so rounding noise on
/// an exactly zero block is not mistaken for curvature.
pub const NULLSPACE_ABS: f64 = 1e-12;
/// Slack for `‖Rᵀu‖` on nullspace vectors `u` of `Q`, relative to `max(1, ‖R‖)`.
pub const INCLUSION_TOL: f64 = 1e-6;
/// Relative Jacobian step.
pub const JACOBIAN_REL_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityVerdict {
    Stable,
    Marginal,
    Unstable,
}

impl StabilityVerdict {
    pub fn from_max_real(max_real: f64, tol: f64) -> Self {
        if max_real < -tol {
            StabilityVerdict::Stable
        } else if max_real.abs() <= tol {
            StabilityVerdict::Marginal
        } else {
            StabilityVerdict::Unstable
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    #[serde(with = "linalg::rows")]
    pub jacobian: DMatrix<f64>,
    #[serde(with = "linalg::complex_list")]
    pub eigenvalues: Vec<Complex64>,
    pub verdict: StabilityVerdict,
    pub max_real_part: f64,
    /// True when only the leading eigenvalues were computed.
    pub partial: bool,
}

impl SpectralReport {
    pub fn jacobian_csv(&self) -> String {
        linalg::matrix_csv(&self.jacobian)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    #[serde(with = "linalg::rows")]
    pub q: DMatrix<f64>,
    #[serde(with = "linalg::rows")]
    pub r: DMatrix<f64>,
    /// Frobenius norms of (estimated − predicted) for the ψψ, θθ and the
    /// two off-diagonal blocks.
    pub residual_kdd: f64,
    pub residual_kgg: f64,
    pub residual_offdiag: f64,
    pub nullspace_inclusion: bool,
    /// Monte-Carlo standard errors of Q and R (Frobenius norm of the
    /// entrywise standard errors).
    pub q_std_error: f64,
    pub r_std_error: f64,
    /// The finite-difference Jacobian the residuals were measured against.
    pub jacobian: Option<SpectralReport>,
}

impl BlockReport {
    /// Report for given blocks with no Jacobian to compare against; the
    /// residuals are zero by construction.
    pub fn from_blocks(q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        if !q.is_square() || q.nrows() != r.nrows() {
            return Err(Error::config(format!(
                "Q is {}x{} but R is {}x{}",
                q.nrows(),
                q.ncols(),
                r.nrows(),
                r.ncols()
            )));
        }
        let q = symmetrize(&q);
        let nullspace_inclusion = nullspace_included(&q, &r);
        Ok(BlockReport {
            q,
            r,
            residual_kdd: 0.0,
            residual_kgg: 0.0,
            residual_offdiag: 0.0,
            nullspace_inclusion,
            q_std_error: 0.0,
            r_std_error: 0.0,
            jacobian: None,
        })
    }

    pub fn max_residual(&self) -> f64 {
        self.residual_kdd.max(self.residual_kgg).max(self.residual_offdiag)
    }

    /// `[[−ρQ, −R], [Rᵀ, 0]]`.
    pub fn predicted_jacobian(&self, rho: f64) -> DMatrix<f64> {
        block_jacobian(&self.q, &self.r, rho)
    }
}

/// `[[−ρQ, −R], [Rᵀ, 0]]` for arbitrary blocks.
pub fn block_jacobian(q: &DMatrix<f64>, r: &DMatrix<f64>, rho: f64) -> DMatrix<f64> {
    let (kd, kg) = (q.nrows(), r.ncols());
    let mut j = DMatrix::zeros(kd + kg, kd + kg);
    j.view_mut((0, 0), (kd, kd)).copy_from(&(q * -rho));
    j.view_mut((0, kd), (kd, kg)).copy_from(&(-r));
    j.view_mut((kd, 0), (kg, kd)).copy_from(&r.transpose());
    j
}

/// Central-difference Jacobian of `field` at `x0`, every evaluation drawing
/// from the same `seed`. The default step is `1e-5 · max(1, ‖x0‖∞)`.
pub fn jacobian_fd(field: &dyn VectorField, x0: &[f64], h: Option<f64>, seed: u64) -> Result<DMatrix<f64>> {
    let n = field.dim();
    if x0.len() != n {
        return Err(Error::config(format!("point has dimension {}, field has {n}", x0.len())));
    }
    let scale = x0.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let h = h.unwrap_or(JACOBIAN_REL_STEP * scale);
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::config(format!("Jacobian step must be positive, got {h}")));
    }
    let columns = crate::par::map_range(n, |j| {
        let mut up = x0.to_vec();
        let mut dn = x0.to_vec();
        up[j] += h;
        dn[j] -= h;
        let fu = field.eval(&up, seed)?;
        let fd = field.eval(&dn, seed)?;
        Ok::<Vec<f64>, Error>(fu.iter().zip(&fd).map(|(a, b)| (a - b) / (2.0 * h)).collect())
    });
    let mut jac = DMatrix::zeros(n, n);
    for (j, col) in columns.into_iter().enumerate() {
        let col: Vec<f64> = col?;
        if col.len() != n {
            return Err(Error::config(format!("field returned {} components, expected {n}", col.len())));
        }
        for (i, v) in col.into_iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::numerical("Jacobian entry", x0));
            }
            jac[(i, j)] = v;
        }
    }
    Ok(jac)
}

/// Eigenvalues and stability verdict of a square matrix. Beyond the dense
/// limit only the eigenvalues nearest the right edge of the spectrum are
/// reported, with `partial` set.
pub fn spectrum(matrix: &DMatrix<f64>) -> Result<SpectralReport> {
    let n = matrix.nrows();
    let (eigenvalues, partial) = if n <= MAX_DENSE_DIM {
        (linalg::eigenvalues(matrix)?, false)
    } else {
        (linalg::leading_eigenvalues(matrix, 8, 300)?, true)
    };
    let max_real_part = if eigenvalues.is_empty() {
        0.0
    } else {
        eigenvalues.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max)
    };
    Ok(SpectralReport {
        jacobian: matrix.clone(),
        eigenvalues,
        verdict: StabilityVerdict::from_max_real(max_real_part, SPECTRUM_TOL),
        max_real_part,
        partial,
    })
}

/// Spectrum of the finite-difference Jacobian of `field` at `x0`.
pub fn analyze(field: &dyn VectorField, x0: &[f64], seed: u64) -> Result<SpectralReport> {
    spectrum(&jacobian_fd(field, x0, None, seed)?)
}

fn symmetrize(q: &DMatrix<f64>) -> DMatrix<f64> {
    (q + q.transpose()) * 0.5
}

/// Eigenvectors of a symmetric PSD matrix split at the nullspace cut:
/// `(range vectors, range eigenvalues, null vectors)`.
fn split_range(m: &DMatrix<f64>) -> (Vec<nalgebra::DVector<f64>>, Vec<f64>, Vec<nalgebra::DVector<f64>>) {
    if m.nrows() == 0 {
        return (Vec::new(), Vec::new(), Vec::new());
    }
    let eig = SymmetricEigen::new(m.clone());
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
    let cut = (NULLSPACE_REL * top).max(NULLSPACE_ABS);
    let mut range = Vec::new();
    let mut values = Vec::new();
    let mut null = Vec::new();
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(i).into_owned();
        if lambda > cut {
            range.push(v);
            values.push(lambda);
        } else {
            null.push(v);
        }
    }
    (range, values, null)
}

fn nullspace_included(q: &DMatrix<f64>, r: &DMatrix<f64>) -> bool {
    let (_, _, null) = split_range(q);
    let slack = INCLUSION_TOL * r.norm().max(1.0);
    null.iter().all(|u| (r.transpose() * u).norm() <= slack)
}

/// Monte-Carlo estimates of Q and R at `(ψ*, θ*)` together with the
/// residuals of the finite-difference drift Jacobian against the predicted
/// block form.
pub fn qr_blocks(problem: &SgpProblem, psi: &[f64], theta: &[f64], mc: McConfig) -> Result<BlockReport> {
    let (kd, kg) = (problem.psi_dim(), problem.theta_dim());
    if psi.len() != kd || theta.len() != kg {
        return Err(Error::config(format!(
            "parameter dimensions ({}, {}) do not match problem ({kd}, {kg})",
            psi.len(),
            theta.len()
        )));
    }
    if kd + kg > MAX_DENSE_DIM {
        return Err(Error::config(format!("block analysis is limited to {MAX_DENSE_DIM} parameters, got {}", kd + kg)));
    }
    if mc.n == 0 {
        return Err(Error::config("Monte-Carlo sample count must be at least 1"));
    }
    let d = problem.discriminator.as_ref();
    let p = Params::new(psi, theta);

    let mass = problem.penalty.mass(p);
    if !(mass >= 0.0) || !mass.is_finite() {
        return Err(Error::InvalidMeasure { mass, point: p.flat() });
    }
    let x_hat = problem.penalty.sample(p, mc.n, mc.seed);
    let q_parts = crate::par::map_range(x_hat.len(), |i| {
        let m = d.mixed_matrix(x_hat.row(i), psi);
        (&m * m.transpose()) * mass
    });
    let (q, q_se) = mean_and_std_error(&q_parts, kd, kd);

    let (_, z, x_g) = problem.draws(psi, theta, mc);
    let directions: Vec<_> = (0..kg)
        .map(|j| {
            let mut e = vec![0.0; kg];
            e[j] = 1.0;
            problem.generator.jvp(&z, theta, &e)
        })
        .collect();
    let r_parts = crate::par::map_range(x_g.len(), |i| {
        let m = d.mixed_matrix(x_g.row(i), psi);
        let mut jg = DMatrix::zeros(x_g.dim(), kg);
        for (j, dir) in directions.iter().enumerate() {
            for (a, v) in dir.row(i).iter().enumerate() {
                jg[(a, j)] = *v;
            }
        }
        m * jg
    });
    let (r, r_se) = mean_and_std_error(&r_parts, kd, kg);
    if !q.iter().chain(r.iter()).all(|v| v.is_finite()) {
        return Err(Error::numerical("Q/R block estimate", &p.flat()));
    }

    let field = SgpField { problem: problem.clone(), n: mc.n };
    let x0: Vec<f64> = psi.iter().chain(theta).copied().collect();
    let jac = jacobian_fd(&field, &x0, None, mc.seed)?;
    let predicted = block_jacobian(&q, &r, problem.rho);
    let diff = &jac - &predicted;
    let residual_kdd = diff.view((0, 0), (kd, kd)).norm();
    let residual_kgg = diff.view((kd, kd), (kg, kg)).norm();
    let off_a = diff.view((0, kd), (kd, kg)).norm();
    let off_b = diff.view((kd, 0), (kg, kd)).norm();

    let mut report = BlockReport::from_blocks(q, r)?;
    report.residual_kdd = residual_kdd;
    report.residual_kgg = residual_kgg;
    report.residual_offdiag = (off_a * off_a + off_b * off_b).sqrt();
    report.q_std_error = q_se;
    report.r_std_error = r_se;
    report.jacobian = Some(spectrum(&jac)?);
    Ok(report)
}

fn mean_and_std_error(parts: &[DMatrix<f64>], rows: usize, cols: usize) -> (DMatrix<f64>, f64) {
    let n = parts.len() as f64;
    let mut mean = DMatrix::zeros(rows, cols);
    for p in parts {
        mean += p;
    }
    mean /= n;
    if parts.len() < 2 {
        return (mean, 0.0);
    }
    let mut var = DMatrix::<f64>::zeros(rows, cols);
    for p in parts {
        let d = p - &mean;
        var += d.component_mul(&d);
    }
    let se2: f64 = var.iter().map(|v| v / (n - 1.0) / n).sum();
    (mean, se2.sqrt())
}

/// Spectrum of the drift Jacobian restricted to the range of Q (for ψ) and
/// of RᵀR (for θ):
///
/// ```text
/// J′ = [[−ρΛ_D, −T_Dᵀ R T_G], [T_Gᵀ Rᵀ T_D, 0]]
/// ```
///
/// When RᵀR vanishes only the discriminator block `−ρΛ_D` survives.
pub fn projected_spectrum(block: &BlockReport, rho: f64) -> Result<SpectralReport> {
    if !block.nullspace_inclusion {
        return Err(Error::StructureViolation(
            "the nullspace of Q is not contained in the nullspace of Rᵀ".into(),
        ));
    }
    let (td, lambda_d, _) = split_range(&block.q);
    let rtr = block.r.transpose() * &block.r;
    let (tg, _, _) = split_range(&rtr);
    let (kd, kg) = (td.len(), tg.len());
    let mut j = DMatrix::zeros(kd + kg, kd + kg);
    for (a, l) in lambda_d.iter().enumerate() {
        j[(a, a)] = -rho * l;
    }
    for (a, u) in td.iter().enumerate() {
        for (b, v) in tg.iter().enumerate() {
            let c = (u.transpose() * &block.r * v)[(0, 0)];
            j[(a, kd + b)] = -c;
            j[(kd + b, a)] = c;
        }
    }
    spectrum(&j)
}
