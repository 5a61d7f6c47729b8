use std::sync::Arc;

use super::*;
use crate::analytic::{dirac_gan_field, quadratic_gan_field};
use crate::models::{MlpDiscriminator, MlpGenerator, StandardGaussian};

#[test]
fn dirac_instance_matches_closed_form() {
    let prob = dirac_problem(1.0, MassProfile::Constant(1.0)).unwrap();
    let d = vector_field(&prob, &[1.0], &[0.0], McConfig::new(16, 3)).unwrap();
    assert_eq!(d.psi, vec![-1.0]);
    assert_eq!(d.theta, vec![1.0]);
    // zero variance: any seed gives the same drift
    let e = vector_field(&prob, &[1.0], &[0.0], McConfig::new(16, 99)).unwrap();
    assert_eq!(d, e);
}

#[test]
fn dirac_instance_with_state_dependent_mass() {
    for profile in [MassProfile::PsiSquared, MassProfile::Bump { r2: 4.0 }, MassProfile::Gaussian(0.5)] {
        let prob = dirac_problem(0.7, profile).unwrap();
        for &(p, t) in &[(1.0, 0.0), (0.3, -0.4), (-0.8, 0.6)] {
            let d = vector_field(&prob, &[p], &[t], McConfig::new(4, 1)).unwrap();
            let m = |a: f64, b: f64| profile.value(Params::new(&[a], &[b]));
            let dm = |a: f64, b: f64| profile.partial(Params::new(&[a], &[b]), ParamIndex::Psi(0));
            let (ep, et) = dirac_gan_field(p, t, 0.7, m, dm);
            assert!((d.psi[0] - ep).abs() < 1e-12, "{profile}: {} vs {ep}", d.psi[0]);
            assert!((d.theta[0] - et).abs() < 1e-12);
        }
    }
}

#[test]
fn quadratic_instance_within_three_sigma() {
    let prob = quadratic_problem(1.0, None).unwrap();
    let mc = McConfig::new(1_000_000, 17);
    let d = vector_field(&prob, &[1.0], &[1.0], mc).unwrap();
    let sigma = drift_std_error(&prob, &[1.0], &[1.0], mc, 20).unwrap();
    let (ep, et) = quadratic_gan_field(1.0, 1.0, 1.0, |t| t * t / 3.0);
    assert!((d.psi[0] - ep).abs() <= 3.0 * sigma[0] + 1e-12, "{} vs {ep} ({})", d.psi[0], sigma[0]);
    assert!((d.theta[0] - et).abs() <= 3.0 * sigma[1] + 1e-12, "{} vs {et} ({})", d.theta[0], sigma[1]);
}

#[test]
fn drift_vanishes_at_equilibria() {
    let quad = quadratic_problem(1.5, None).unwrap();
    for theta in [1.0, -1.0] {
        let mc = McConfig::new(100_000, 5);
        let d = vector_field(&quad, &[0.0], &[theta], mc).unwrap();
        let s = drift_std_error(&quad, &[0.0], &[theta], mc, 20).unwrap();
        assert!(d.psi[0].abs() <= 3.0 * s[0] + 1e-12 && d.theta[0].abs() <= 3.0 * s[1] + 1e-12, "{d:?} {s:?}");
    }
    let qd = quadratic_dirac_problem(0.375).unwrap();
    for a in [-2.0, -0.5, 0.0, 1.0] {
        let d = vector_field(&qd, &[a], &[0.0], McConfig::new(64, 1)).unwrap();
        assert_eq!(d.flat(), vec![0.0, 0.0]);
    }
}

#[test]
fn quadratic_dirac_instance_matches_closed_form() {
    // the interpolation measure on [0, θ] has second moment θ²/3
    let prob = quadratic_dirac_problem(0.375).unwrap();
    let d = vector_field(&prob, &[0.4], &[1.2], McConfig::new(200_000, 2)).unwrap();
    let (ep, et) = crate::analytic::quadratic_dirac_field(0.4, 1.2, 0.375);
    assert!((d.psi[0] - ep).abs() < 5e-3, "{} vs {ep}", d.psi[0]);
    assert!((d.theta[0] - et).abs() < 1e-9, "{} vs {et}", d.theta[0]);
}

#[test]
fn penalty_gradient_dirac() {
    let prob = dirac_problem(1.0, MassProfile::Constant(1.0)).unwrap();
    assert_eq!(penalty_gradient(&prob, &[3.0], &[0.2], McConfig::new(8, 0)).unwrap(), vec![6.0]);
}

#[test]
fn penalty_gradient_zero_when_gradient_vanishes_on_support() {
    // D = ψx² has ∇ₓD = 0 at the origin
    let prob = quadratic_problem(1.0, Some(Arc::new(Discrete::dirac(vec![0.0], 3.0)))).unwrap();
    assert_eq!(penalty_gradient(&prob, &[0.8], &[1.0], McConfig::new(8, 0)).unwrap(), vec![0.0]);
}

#[test]
fn penalty_gradient_scales_linearly_with_mass() {
    let base: Arc<dyn FiniteMeasure> = Arc::new(Uniform::fixed(-0.5, 1.5));
    let k = 3.7;
    let scaled: Arc<dyn FiniteMeasure> = Arc::new(Uniform::fixed(-0.5, 1.5).with_mass(k));
    let p1 = quadratic_problem(1.0, Some(base)).unwrap();
    let pk = quadratic_problem(1.0, Some(scaled)).unwrap();
    let mc = McConfig::new(1000, 8);
    let g1 = penalty_gradient(&p1, &[0.6], &[1.0], mc).unwrap();
    let gk = penalty_gradient(&pk, &[0.6], &[1.0], mc).unwrap();
    assert_eq!(gk[0], k * g1[0]);
}

fn mlp_problem(kind: PenaltyKind) -> (SgpProblem, Vec<f64>, Vec<f64>) {
    let d = MlpDiscriminator::new(2, &[16, 16]);
    let g = MlpGenerator::new(2, &[8], 2);
    let psi = d.net.init_params(21);
    let theta = g.net.init_params(22);
    let data: Arc<dyn FiniteMeasure> = Arc::new(StandardGaussian { dim: 2 });
    let base = SgpProblem::new(Arc::new(d), Arc::new(g), data.clone(), data.clone(), data, 10.0).unwrap();
    let anchor = (kind == PenaltyKind::GAnc).then(|| vec![2.0, -1.0]);
    let pen = base.table1_penalty(kind, anchor).unwrap();
    (base.with_penalty(pen).unwrap(), psi, theta)
}

#[test]
fn mlp_penalty_gradient_matches_finite_differences() {
    for kind in PenaltyKind::ALL {
        let (prob, psi, theta) = mlp_problem(kind);
        let mc = McConfig::new(64, 4);
        let g = penalty_gradient(&prob, &psi, &theta, mc).unwrap();
        let h = 1e-5;
        for j in (0..psi.len()).step_by(7) {
            let mut up = psi.clone();
            let mut dn = psi.clone();
            up[j] += h;
            dn[j] -= h;
            let fd = (penalty_value(&prob, &up, &theta, mc).unwrap() - penalty_value(&prob, &dn, &theta, mc).unwrap()) / (2.0 * h);
            assert!((g[j] - fd).abs() <= 1e-5 * fd.abs().max(1e-2), "{kind} [{j}]: {} vs {fd}", g[j]);
        }
    }
}

#[test]
fn unpenalized_drift_cancels_when_distributions_agree() {
    // p_d = p_θ: data U(-1,1), generator θz with θ = 1
    let prob = quadratic_problem(1.0, None).unwrap().with_rho(0.0).unwrap();
    for psi in [-2.0, 0.3, 5.0] {
        let mc = McConfig::new(50_000, 6);
        let d = vector_field(&prob, &[psi], &[1.0], mc).unwrap();
        let s = drift_std_error(&prob, &[psi], &[1.0], mc, 20).unwrap();
        assert!(d.psi[0].abs() <= 3.0 * s[0] + 1e-12, "{} vs {}", d.psi[0], s[0]);
    }
}

#[test]
fn drift_is_deterministic_per_seed() {
    let (prob, psi, theta) = mlp_problem(PenaltyKind::Gp);
    let a = vector_field(&prob, &psi, &theta, McConfig::new(32, 1)).unwrap();
    let b = vector_field(&prob, &psi, &theta, McConfig::new(32, 1)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn dimension_mismatch_is_rejected() {
    let prob = dirac_problem(1.0, MassProfile::Constant(1.0)).unwrap();
    assert!(vector_field(&prob, &[1.0, 2.0], &[0.0], McConfig::new(4, 0)).is_err());
    assert!(vector_field(&prob, &[1.0], &[0.0], McConfig::new(0, 0)).is_err());
    assert!(dirac_problem(-1.0, MassProfile::Constant(1.0)).is_err());
}

#[test]
fn assumptions_quadratic_gan_at_equilibrium() {
    let prob = quadratic_problem(1.0, None).unwrap();
    let r = check_assumptions(&prob, &[0.0], &[1.0], AssumptionConfig { n: 100_000, seed: 1, tol: 1e-4 });
    assert_eq!(r.get("A1").unwrap().verdict, Verdict::Pass);
    assert_eq!(r.get("A3").unwrap().verdict, Verdict::Pass);
    assert_eq!(r.get("A6c").unwrap().verdict, Verdict::Pass);
    let a6b = r.get("A6b").unwrap();
    assert_eq!(a6b.verdict, Verdict::Pass);
    assert!((a6b.statistic.unwrap() - 4.0 / 3.0).abs() < 1e-3, "{a6b:?}");
    for id in ["A2", "A4", "A5"] {
        assert_eq!(r.get(id).unwrap().verdict, Verdict::NotMachineCheckable);
    }
}

#[test]
fn assumptions_quadratic_dirac_fails_curvature() {
    let prob = quadratic_dirac_problem(0.375).unwrap();
    let r = check_assumptions(&prob, &[0.0], &[0.0], AssumptionConfig { n: 1000, seed: 1, tol: 1e-4 });
    let a6b = r.get("A6b").unwrap();
    assert_eq!(a6b.verdict, Verdict::Fail);
    assert_eq!(a6b.witness, Some(Witness::Eigenvalue(0.0)));
}

#[test]
fn assumptions_identically_zero_discriminator() {
    // ψ* = 0 makes D and ∇ₓD vanish for the linear discriminator everywhere
    let prob = dirac_problem(1.0, MassProfile::Constant(1.0)).unwrap();
    let r = check_assumptions(&prob, &[0.0], &[0.0], AssumptionConfig { n: 100, seed: 0, tol: 1e-4 });
    for id in ["A1", "A3", "A6c", "A6a-mass"] {
        assert_eq!(r.get(id).unwrap().verdict, Verdict::Pass, "{id}");
    }
}

#[test]
fn failing_check_carries_witness() {
    let prob = dirac_problem(1.0, MassProfile::Constant(1.0)).unwrap();
    let r = check_assumptions(&prob, &[1.0], &[0.5], AssumptionConfig { n: 10, seed: 0, tol: 1e-4 });
    let a3 = r.get("A3").unwrap();
    assert_eq!(a3.verdict, Verdict::Fail);
    assert!(matches!(a3.witness, Some(Witness::Point { .. })));
}
