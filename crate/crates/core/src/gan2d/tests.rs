use super::*;

fn tiny(kind: PenaltyKind) -> TrainConfig {
    TrainConfig {
        penalty_kind: kind,
        hidden: vec![8, 8],
        batch: 32,
        iters: 20,
        metrics_every: 5,
        eval_samples: 64,
        checkpoint_every: 10,
        scatter_every: 10,
        lr: 1e-3,
        ..TrainConfig::default()
    }
}

#[test]
fn gauss8_centres() {
    let d = make_dataset(DatasetKind::Gauss8);
    assert_eq!(d.centers.len(), 8);
    for (k, c) in d.centers.iter().enumerate() {
        let a = k as f64 * std::f64::consts::PI / 4.0;
        assert!((c[0] - 2.0 * a.cos()).abs() < 1e-15 && (c[1] - 2.0 * a.sin()).abs() < 1e-15);
        // point symmetry
        let opposite = d.centers[(k + 4) % 8];
        assert!((c[0] + opposite[0]).abs() < 1e-12 && (c[1] + opposite[1]).abs() < 1e-12);
    }
}

#[test]
fn gauss25_grid() {
    let d = make_dataset(DatasetKind::Gauss25);
    assert_eq!(d.centers.len(), 25);
    for (i, a) in d.centers.iter().enumerate() {
        for b in &d.centers[i + 1..] {
            assert!(a != b);
        }
        assert!(d.centers.contains(&[-a[0], a[1]]) && d.centers.contains(&[a[0], -a[1]]));
    }
    let sum = d.centers.iter().fold([0.0, 0.0], |s, c| [s[0] + c[0], s[1] + c[1]]);
    assert_eq!(sum, [0.0, 0.0]);
}

#[test]
fn samplers_are_deterministic() {
    for kind in DatasetKind::ALL {
        let d = make_dataset(kind);
        assert_eq!(d.sample(100, 5), d.sample(100, 5));
        assert_ne!(d.sample(100, 5), d.sample(100, 6));
    }
    let roll = make_dataset(DatasetKind::Swissroll).sample(10_000, 1);
    assert!(roll.as_slice().iter().all(|v| v.abs() < 2.5));
    let g8 = make_dataset(DatasetKind::Gauss8).sample(10_000, 1);
    let c = mode_coverage(&g8, &make_dataset(DatasetKind::Gauss8).centers, 0.06).unwrap();
    assert_eq!(c.covered, 8);
    assert!(c.high_quality_fraction > 0.98);
}

#[test]
fn coverage_examples() {
    let centers = make_dataset(DatasetKind::Gauss8).centers;
    let all: Vec<f64> = centers.iter().flat_map(|c| std::iter::repeat_n(*c, 20)).flatten().collect();
    let c = mode_coverage(&Batch::new(2, all), &centers, 0.06).unwrap();
    assert_eq!((c.covered, c.high_quality_fraction), (8, 1.0));
    let one = Batch::repeat(&centers[3], 100);
    let c = mode_coverage(&one, &centers, 0.06).unwrap();
    assert_eq!((c.covered, c.high_quality_fraction), (1, 1.0));
    assert!(mode_coverage(&Batch::zeros(2, 0), &centers, 0.06).is_err());
    assert!(mode_coverage(&one, &centers, 0.0).is_err());
}

#[test]
fn coverage_of_uniform_samples_matches_area_ratio() {
    let centers = make_dataset(DatasetKind::Gauss8).centers;
    let n = 1_000_000;
    let mut rng = stream_rng(3, 0);
    let x = Batch::new(2, (0..2 * n).map(|_| rng.gen_range(-3.0..3.0)).collect());
    let c = mode_coverage(&x, &centers, 0.06).unwrap();
    let p = 8.0 * std::f64::consts::PI * 0.06 * 0.06 / 36.0;
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    assert!((c.high_quality_fraction - p).abs() <= 4.0 * sigma, "{} vs {p}", c.high_quality_fraction);
}

#[test]
fn zero_iterations_give_initial_row() {
    let cfg = TrainConfig { iters: 0, ..tiny(PenaltyKind::Gp) };
    let r = train(&cfg, None).unwrap();
    assert_eq!(r.rows.len(), 1);
    assert_eq!(r.rows[0].iter, 0);
}

#[test]
fn discriminator_step_is_the_drift() {
    for kind in PenaltyKind::ALL {
        let cfg = TrainConfig { iters: 1, lr: 1e-4, ..tiny(kind) };
        let setup = Setup::new(&cfg).unwrap();
        let (psi0, theta0) = setup.init(cfg.seed);
        let r = train(&cfg, None).unwrap();
        let drift = vector_field(&setup.problem, &psi0, &theta0, McConfig::new(cfg.batch, step_seed(cfg.seed, 0))).unwrap();
        for (i, g) in drift.psi.iter().enumerate() {
            assert!(((r.psi[i] - psi0[i]) / cfg.lr - g).abs() <= 1e-10, "{kind}");
        }
        for (i, g) in drift.theta.iter().enumerate() {
            assert!(((r.theta[i] - theta0[i]) / cfg.lr - g).abs() <= 1e-10, "{kind}");
        }
    }
}

#[test]
fn training_is_deterministic() {
    let cfg = tiny(PenaltyKind::GAnc);
    let a = train(&cfg, None).unwrap();
    let b = train(&cfg, None).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_csv(), b.to_csv());
    assert!(a.rows.iter().all(|r| r.penalty_value >= 0.0));
    assert_eq!(a.rows.iter().map(|r| r.iter).collect::<Vec<_>>(), vec![0, 5, 10, 15, 20]);
    let c = train(&TrainConfig { seed: 1, ..cfg }, None).unwrap();
    assert_ne!(a.psi, c.psi);
}

#[test]
fn adam_variant_runs() {
    let cfg = TrainConfig { optimizer: Optimizer::adam(), ..tiny(PenaltyKind::Mid) };
    let r = train(&cfg, None).unwrap();
    assert!(r.psi.iter().chain(&r.theta).all(|v| v.is_finite()));
    let json = serde_json::to_string(&cfg).unwrap();
    assert_eq!(serde_json::from_str::<TrainConfig>(&json).unwrap(), cfg);
}

#[test]
fn config_validation() {
    assert!(TrainConfig { anchor: Some([0.0, 0.0]), ..tiny(PenaltyKind::Gp) }.validate().is_err());
    assert!(TrainConfig { lr: 0.0, ..tiny(PenaltyKind::Gp) }.validate().is_err());
    assert!(TrainConfig { rho: -1.0, ..tiny(PenaltyKind::Gp) }.validate().is_err());
    assert_eq!(tiny(PenaltyKind::GAnc).resolved_anchor(), Some([2.0, -1.0]));
    assert_eq!(tiny(PenaltyKind::Pg).resolved_anchor(), None);
    assert!(serde_json::from_str::<TrainConfig>(r#"{"bogus": 1}"#).is_err());
    let partial: TrainConfig = serde_json::from_str(r#"{"dataset": "gauss25", "penalty_kind": "pd"}"#).unwrap();
    assert_eq!(partial.iters, 30_000);
    assert_eq!(partial.dataset, DatasetKind::Gauss25);
}

#[test]
fn artifacts_and_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let out = OutputDir::new(dir.path()).unwrap();
    let cfg = tiny(PenaltyKind::Pd);
    let r = train(&cfg, Some(&out)).unwrap();
    for name in ["metadata.json", "record.csv", "checkpoint_000000.bin", "checkpoint_000020.bin", "samples_000010.svg"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let (h, psi, theta) = read_checkpoint(&dir.path().join("checkpoint_000020.bin")).unwrap();
    assert_eq!(h.iter, 20);
    assert_eq!(h.arch.discriminator, vec![2, 8, 8, 1]);
    assert_eq!((psi, theta), (r.psi.clone(), r.theta.clone()));
    assert_eq!(fs::read_to_string(dir.path().join("record.csv")).unwrap(), r.to_csv());
}

#[test]
fn non_finite_training_aborts_and_keeps_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out = OutputDir::new(dir.path()).unwrap();
    let cfg = TrainConfig { lr: f64::MAX, optimizer: Optimizer::adam(), iters: 50, ..tiny(PenaltyKind::Gp) };
    let err = train(&cfg, Some(&out)).unwrap_err();
    assert!(matches!(err, Error::NumericalFailure { .. }), "{err}");
    assert!(dir.path().join("checkpoint_000000.bin").exists());
    assert!(dir.path().join("record.csv").exists());
}

#[test]
fn swissroll_rows_have_no_coverage() {
    let cfg = TrainConfig { dataset: DatasetKind::Swissroll, iters: 5, ..tiny(PenaltyKind::Pg) };
    let r = train(&cfg, None).unwrap();
    assert!(r.rows.iter().all(|row| row.mode_coverage.is_none()));
    assert!(r.to_csv().lines().nth(1).unwrap().ends_with(",,"));
}
