//! Sampling checks of the local-convergence hypotheses at a candidate
//! equilibrium. Checks that quantify over open neighbourhoods or Hessian
//! nullspaces have no finite decision procedure and are reported as such.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SgpProblem;
use crate::batch::Batch;
use crate::measure::Params;
use crate::rng::{child_seed, stream_rng, streams};

/// Probe radius and count for θ-perturbations around θ*.
pub const PROBE_RADIUS: f64 = 1e-2;
pub const PROBE_DIRECTIONS: usize = 8;
/// Largest ψ-dimension for which Q is assembled densely.
pub const MAX_DENSE_Q: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionConfig {
    pub n: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for AssumptionConfig {
    fn default() -> Self {
        AssumptionConfig { n: 100_000, seed: 0, tol: 1e-4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
    NotMachineCheckable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Witness {
    /// Sample point `x` (and the θ it was drawn at).
    Point { x: Vec<f64>, theta: Vec<f64> },
    Eigenvalue(f64),
    Mass { mass: f64, theta: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub id: String,
    pub verdict: Verdict,
    /// The checked statistic (max |D|, max ‖∇D‖, min eigenvalue, ...).
    pub statistic: Option<f64>,
    pub witness: Option<Witness>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub psi: Vec<f64>,
    pub theta: Vec<f64>,
    pub config: AssumptionConfig,
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn get(&self, id: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.id == id)
    }
}

fn probe_thetas(theta: &[f64], seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream_rng(seed, streams::PROBE);
    let mut out = vec![theta.to_vec()];
    for _ in 0..PROBE_DIRECTIONS {
        let dir: Vec<f64> = (0..theta.len()).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        out.push(theta.iter().zip(&dir).map(|(t, d)| t + PROBE_RADIUS * d / norm).collect());
    }
    out
}

/// Largest value of `stat` over a batch, with the row that attains it.
fn batch_max(batch: &Batch, stat: impl Fn(usize) -> f64) -> (f64, Vec<f64>) {
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for i in 0..batch.len() {
        let v = stat(i);
        if !(v <= best.0) {
            best = (v, batch.row(i).to_vec());
        }
    }
    best
}

fn bounded_check(id: &str, worst: f64, witness: Witness, tol: f64, note: &str) -> AssumptionCheck {
    let verdict = if !worst.is_finite() {
        Verdict::Fail
    } else if worst <= tol {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    AssumptionCheck {
        id: id.into(),
        verdict,
        statistic: Some(worst),
        witness: (verdict == Verdict::Fail).then_some(witness),
        note: note.into(),
    }
}

fn not_checkable(id: &str, note: &str) -> AssumptionCheck {
    AssumptionCheck {
        id: id.into(),
        verdict: Verdict::NotMachineCheckable,
        statistic: None,
        witness: None,
        note: note.into(),
    }
}

/// Sampling-based verdicts for the hypotheses at `(ψ*, θ*)`.
pub fn check_assumptions(problem: &SgpProblem, psi: &[f64], theta: &[f64], cfg: AssumptionConfig) -> AssumptionReport {
    let d = problem.discriminator.as_ref();
    let n = cfg.n.max(1);
    let probes = probe_thetas(theta, cfg.seed);
    let mut checks = Vec::new();

    // A1: D(·; ψ*) vanishes on the data support.
    let p_star = Params::new(psi, theta);
    let x_d = problem.data.sample(p_star, n, child_seed(cfg.seed, streams::DATA));
    let vals = d.value(&x_d, psi);
    let (worst, x) = batch_max(&x_d, |i| vals[i].abs());
    checks.push(bounded_check(
        "A1",
        worst,
        Witness::Point { x, theta: theta.to_vec() },
        cfg.tol,
        "max |D(x; psi*)| over data samples",
    ));

    checks.push(not_checkable("A2", "quantifies over a neighbourhood of psi* (local constancy along the Hessian nullspace)"));

    // A3: D(·; ψ*) vanishes on generator supports near θ*.
    let mut a3 = (f64::NEG_INFINITY, Witness::Eigenvalue(f64::NAN));
    let model = problem.model_distribution();
    for (k, t) in probes.iter().enumerate() {
        let x_g = model.sample(Params::new(psi, t), n, child_seed(cfg.seed, 100 + k as u64));
        let vals = d.value(&x_g, psi);
        let (w, x) = batch_max(&x_g, |i| vals[i].abs());
        if !(w <= a3.0) {
            a3 = (w, Witness::Point { x, theta: t.clone() });
        }
    }
    checks.push(bounded_check("A3", a3.0, a3.1, cfg.tol, "max |D(x; psi*)| over generator samples at theta* and probes"));

    checks.push(not_checkable("A4", "quantifies over the nullspace of the discriminator Hessian"));
    checks.push(not_checkable("A5", "requires the penalty support to approach the data manifold smoothly"));

    // A6a (mass part): finite, non-negative mass at θ* and probes.
    let mut a6a = AssumptionCheck {
        id: "A6a-mass".into(),
        verdict: Verdict::Pass,
        statistic: None,
        witness: None,
        note: "penalty mass finite and non-negative at theta* and probes".into(),
    };
    let mut max_mass = 0.0f64;
    for t in &probes {
        let m = problem.penalty.mass(Params::new(psi, t));
        if !(m >= 0.0) || !m.is_finite() {
            a6a.verdict = Verdict::Fail;
            a6a.witness = Some(Witness::Mass { mass: m, theta: t.clone() });
            break;
        }
        max_mass = max_mass.max(m);
    }
    a6a.statistic = Some(max_mass);
    checks.push(a6a);

    // A6b: Q = E_μ*[∇_{ψx}D ∇_{ψx}Dᵀ] positive definite.
    checks.push(if problem.psi_dim() > MAX_DENSE_Q {
        AssumptionCheck {
            id: "A6b".into(),
            verdict: Verdict::Inconclusive,
            statistic: None,
            witness: None,
            note: format!("dim(psi) = {} exceeds the dense limit {MAX_DENSE_Q}", problem.psi_dim()),
        }
    } else {
        let q = q_matrix(problem, psi, theta, n, cfg.seed);
        let min_eig = SymmetricEigen::new(q).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let pass = min_eig > cfg.tol;
        AssumptionCheck {
            id: "A6b".into(),
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            statistic: Some(min_eig),
            witness: (!pass).then_some(Witness::Eigenvalue(min_eig)),
            note: "smallest eigenvalue of the Monte-Carlo Q".into(),
        }
    });

    // A6c: ∇_x D(·; ψ*) vanishes on penalty supports near θ*.
    let mut a6c = (f64::NEG_INFINITY, Witness::Eigenvalue(f64::NAN));
    for (k, t) in probes.iter().enumerate() {
        let x = problem.penalty.sample(Params::new(psi, t), n, child_seed(cfg.seed, 200 + k as u64));
        let g = d.grad_x(&x, psi);
        let (w, pt) = batch_max(&x, |i| g.row(i).iter().map(|v| v * v).sum::<f64>().sqrt());
        if !(w <= a6c.0) {
            a6c = (w, Witness::Point { x: pt, theta: t.clone() });
        }
    }
    checks.push(bounded_check("A6c", a6c.0, a6c.1, cfg.tol, "max |grad_x D(x; psi*)| over penalty samples at theta* and probes"));

    AssumptionReport { psi: psi.to_vec(), theta: theta.to_vec(), config: cfg, checks }
}

/// Monte-Carlo `Q = M · mean ∇_{ψx}D ∇_{ψx}Dᵀ` over penalty draws.
pub fn q_matrix(problem: &SgpProblem, psi: &[f64], theta: &[f64], n: usize, seed: u64) -> DMatrix<f64> {
    let p = Params::new(psi, theta);
    let x = problem.penalty.sample(p, n, seed);
    let mass = problem.penalty.mass(p);
    let k = problem.psi_dim();
    let parts = crate::par::map_range(x.len(), |i| {
        let m = problem.discriminator.mixed_matrix(x.row(i), psi);
        &m * m.transpose()
    });
    let mut q = DMatrix::zeros(k, k);
    for part in parts {
        q += part;
    }
    q * (mass / x.len() as f64)
}
