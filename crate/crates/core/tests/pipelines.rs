//! End-to-end paths through the public API: problem descriptions in JSON,
//! Monte-Carlo drifts against closed forms, and training artifacts on disk.

use sgp_core::analytic::{quadratic_gan_spectrum, ToySystem2D};
use sgp_core::dynamics::McConfig;
use sgp_core::field::VectorField;
use sgp_core::gan2d::{read_checkpoint, train, DatasetKind, OutputDir, TrainConfig};
use sgp_core::integrate::{integrate_ode, TerminalReason};
use sgp_core::measure::PenaltyKind;
use sgp_core::problems::ProblemSpec;
use sgp_core::stability::{analyze, projected_spectrum, qr_blocks, StabilityVerdict};

fn toy(json: &str) -> sgp_core::problems::ToySpec {
    match serde_json::from_str::<ProblemSpec>(json).unwrap() {
        ProblemSpec::Toy(t) => t,
        other => panic!("expected a toy problem, got {other:?}"),
    }
}

#[test]
fn dirac_spec_to_spectrum() {
    let t = toy(r#"{"toy": {"system": "dirac", "rho": 0.5, "mass": "const:2"}}"#);
    let field = t.field(1).unwrap();
    let report = analyze(field.as_ref(), &t.point(), 0).unwrap();
    assert_eq!(report.verdict, StabilityVerdict::Stable);
    // trace -1, determinant 1
    let re: f64 = report.eigenvalues.iter().map(|e| e.re).sum();
    let prod = report.eigenvalues[0] * report.eigenvalues[1];
    assert!((re + 1.0).abs() < 1e-8, "{re}");
    assert!((prod.re - 1.0).abs() < 1e-8 && prod.im.abs() < 1e-8, "{prod}");
}

#[test]
fn monte_carlo_quadratic_drift_matches_closed_form() {
    let t = toy(r#"{"toy": {"system": "quadratic", "rho": 1.5, "penalty": {"kind": "dirac", "params": [1.0]}}}"#);
    let mc = t.field(100_000).unwrap();
    let exact = ToySystem2D::quadratic(1.5, |_| 1.0);
    for p in [[0.0, 1.0], [0.3, -0.8], [-0.5, 1.4]] {
        let a = mc.eval(&p, 3).unwrap();
        let b = VectorField::eval(&exact, &p, 0).unwrap();
        for k in 0..2 {
            assert!((a[k] - b[k]).abs() < 1e-3, "at {p:?}: {a:?} vs {b:?}");
        }
    }
}

#[test]
fn blocks_of_quadratic_problem_reproduce_closed_form_spectrum() {
    let t = toy(r#"{"toy": {"system": "quadratic", "rho": 1.0, "penalty": {"kind": "dirac", "params": [1.0]}}}"#);
    let problem = t.sgp_problem().unwrap();
    let blocks = qr_blocks(&problem, &[0.0], &[1.0], McConfig::new(100_000, 0)).unwrap();
    let projected = projected_spectrum(&blocks, 1.0).unwrap();
    assert_eq!(projected.verdict, StabilityVerdict::Stable);
    let (l1, l2) = quadratic_gan_spectrum(1.0, 1.0);
    let mut got = projected.eigenvalues.clone();
    got.sort_by(|a, b| a.re.total_cmp(&b.re));
    let mut want = [l1, l2];
    want.sort_by(|a, b| a.re.total_cmp(&b.re));
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).norm() < 1e-2, "{g} vs {w}");
    }
}

#[test]
fn trajectory_from_spec_reaches_equilibrium() {
    let t = toy(r#"{"toy": {"system": "dirac", "rho": 1.0}}"#);
    let field = t.field(1).unwrap();
    let traj = integrate_ode(field.as_ref(), &[1.0, 0.5], 0.01, 60.0, None, 0).unwrap();
    assert_eq!(traj.terminal_reason, TerminalReason::MaxTime);
    assert!(traj.last().iter().all(|v| v.abs() < 1e-6), "{:?}", traj.last());
}

#[test]
fn training_writes_replayable_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig {
        dataset: DatasetKind::Gauss8,
        penalty_kind: PenaltyKind::GAnc,
        hidden: vec![8, 8],
        iters: 20,
        batch: 32,
        lr: 1e-2,
        metrics_every: 10,
        eval_samples: 256,
        checkpoint_every: 10,
        scatter_every: 20,
        ..Default::default()
    };
    let out = OutputDir::new(dir.path()).unwrap();
    let record = train(&cfg, Some(&out)).unwrap();
    for name in ["metadata.json", "record.csv", "checkpoint_000000.bin", "checkpoint_000020.bin", "samples_000020.svg"] {
        assert!(dir.path().join(name).is_file(), "{name} missing");
    }
    let (header, psi, theta) = read_checkpoint(&dir.path().join("checkpoint_000020.bin")).unwrap();
    assert_eq!(header.iter, 20);
    assert_eq!(psi, record.psi);
    assert_eq!(theta, record.theta);
    let csv = std::fs::read_to_string(dir.path().join("record.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + record.rows.len());

    let again = train(&cfg, None).unwrap();
    assert_eq!(again.psi, record.psi);
    assert_eq!(again.theta, record.theta);
}
