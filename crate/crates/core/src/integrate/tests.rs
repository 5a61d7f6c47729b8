use super::*;
use crate::analytic::ToySystem2D;
use crate::dynamics::{dirac_problem, SgpField};
use crate::field::FnField;
use crate::measure::MassProfile;

fn oscillator() -> FnField<impl Fn(&[f64]) -> Vec<f64> + Send + Sync> {
    FnField::new(2, |x: &[f64]| vec![-x[1], x[0]])
}

#[test]
fn harmonic_oscillator_returns_after_one_period() {
    let t = integrate_ode(&oscillator(), &[1.0, 0.0], 0.01, 2.0 * std::f64::consts::PI, None, 0).unwrap();
    assert_eq!(t.terminal_reason, TerminalReason::MaxTime);
    assert!((t.final_time() - 2.0 * std::f64::consts::PI).abs() < 1e-12);
    let end = t.last();
    assert!((end[0] - 1.0).abs() < 1e-6 && end[1].abs() < 1e-6, "{end:?}");
    assert!(t.times.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn rk4_is_fourth_order() {
    let err = |dt: f64| {
        let t = integrate_ode(&oscillator(), &[1.0, 0.0], dt, 3.0, None, 0).unwrap();
        let e = t.last();
        ((e[0] - 3f64.cos()).powi(2) + (e[1] - 3f64.sin()).powi(2)).sqrt()
    };
    let ratio = err(0.1) / err(0.05);
    assert!(ratio >= 12.0, "{ratio}");
}

#[test]
fn dirac_gan_converges() {
    let f = ToySystem2D::dirac(1.0, MassProfile::Constant(1.0));
    let stop = StopRule::new(vec![0.0, 0.0]);
    let t = integrate_ode(&f, &[1.0, 1.0], 0.01, 50.0, Some(&stop), 0).unwrap();
    assert_eq!(t.terminal_reason, TerminalReason::Converged);
    assert!(norm(t.last()) <= 1e-4);
}

#[test]
fn unpenalized_dirac_gan_conserves_lyapunov_function() {
    let f = ToySystem2D::dirac(0.0, MassProfile::Constant(1.0));
    let stop = StopRule::new(vec![0.0, 0.0]);
    let t = integrate_ode(&f, &[1.0, 0.0], 0.01, 20.0, Some(&stop), 0).unwrap();
    assert_eq!(t.terminal_reason, TerminalReason::MaxTime);
    for s in &t.states {
        assert!((s[0] * s[0] + s[1] * s[1] - 1.0).abs() < 1e-8);
    }
}

#[test]
fn gd_tracks_rk4_for_small_steps() {
    let f = ToySystem2D::dirac(1.0, MassProfile::Constant(1.0));
    let gd = simultaneous_gd(&f, &[1.0, 1.0], 1e-3, 1000, None, 0).unwrap();
    let ode = integrate_ode(&f, &[1.0, 1.0], 1e-3, 1.0, None, 0).unwrap();
    assert!((gd.final_time() - 1.0).abs() < 1e-12);
    for (a, b) in gd.states.iter().zip(&ode.states) {
        assert!(dist(a, b) <= 0.05);
    }
}

#[test]
fn zero_field_is_constant() {
    let f = FnField::new(3, |_: &[f64]| vec![0.0; 3]);
    let t = simultaneous_gd(&f, &[1.0, -2.0, 3.0], 0.1, 50, None, 0).unwrap();
    assert!(t.states.iter().all(|s| s == &vec![1.0, -2.0, 3.0]));
    let t = integrate_ode(&f, &[1.0, -2.0, 3.0], 0.1, 5.0, None, 0).unwrap();
    assert!(t.states.iter().all(|s| s == &vec![1.0, -2.0, 3.0]));
}

#[test]
fn quadratic_dirac_does_not_converge_to_origin() {
    let f = ToySystem2D::quadratic_dirac(0.375);
    let t = integrate_ode(&f, &[1.0, 0.5], 0.01, 200.0, Some(&StopRule::new(vec![0.0, 0.0])), 0).unwrap();
    assert_ne!(t.terminal_reason, TerminalReason::Converged);
    assert!(norm(t.last()) > 0.1, "{:?}", t.last());
    let g = simultaneous_gd(&f, &[1.0, 0.5], 0.01, 20_000, None, 0).unwrap();
    assert!(norm(g.last()) > 0.1);
}

#[test]
fn divergence_and_failure_are_terminal_reasons() {
    let grow = FnField::new(1, |x: &[f64]| vec![x[0] * x[0]]);
    let t = integrate_ode(&grow, &[1.0], 0.01, 10.0, None, 0).unwrap();
    assert!(matches!(t.terminal_reason, TerminalReason::Diverged | TerminalReason::NumericalFailure));
    let nan = FnField::new(1, |x: &[f64]| vec![if x[0] > 1.5 { f64::NAN } else { 1.0 }]);
    let t = integrate_ode(&nan, &[1.0], 0.1, 10.0, None, 0).unwrap();
    assert_eq!(t.terminal_reason, TerminalReason::NumericalFailure);
    assert!(t.states.iter().all(|s| s[0].is_finite()));
    assert!(integrate_ode(&nan, &[1.0], 0.0, 1.0, None, 0).is_err());
    assert!(integrate_ode(&nan, &[1.0], 0.1, 0.01, None, 0).is_err());
    assert!(simultaneous_gd(&nan, &[1.0], -1.0, 1, None, 0).is_err());
}

#[test]
fn trajectories_are_deterministic() {
    let f = SgpField { problem: crate::dynamics::quadratic_problem(1.0, None).unwrap(), n: 256 };
    let a = integrate_ode(&f, &[0.3, 0.8], 0.05, 2.0, None, 9).unwrap();
    let b = integrate_ode(&f, &[0.3, 0.8], 0.05, 2.0, None, 9).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_csv(&["psi", "theta"]), b.to_csv(&["psi", "theta"]));
    let c = integrate_ode(&f, &[0.3, 0.8], 0.05, 2.0, None, 10).unwrap();
    assert_ne!(a, c);
}

#[test]
fn stochastic_dirac_instance_matches_toy_trajectory() {
    let sgp = SgpField { problem: dirac_problem(1.0, MassProfile::Constant(1.0)).unwrap(), n: 4 };
    let toy = ToySystem2D::dirac(1.0, MassProfile::Constant(1.0));
    let a = integrate_ode(&sgp, &[1.0, 1.0], 0.01, 5.0, None, 0).unwrap();
    let b = integrate_ode(&toy, &[1.0, 1.0], 0.01, 5.0, None, 0).unwrap();
    for (x, y) in a.states.iter().zip(&b.states) {
        assert!(dist(x, y) < 1e-12);
    }
}

#[test]
fn csv_layout() {
    let t = simultaneous_gd(&oscillator(), &[1.0, 0.0], 0.5, 2, None, 0).unwrap();
    let csv = t.to_csv(&["psi", "theta"]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,psi,theta");
    assert_eq!(lines[1], "0,1,0");
    assert_eq!(lines.len(), 4);
    assert_eq!(t.to_csv(&[]).lines().next(), Some("t,x0,x1"));
}

fn near_vertical_line(segs: &[[[f64; 2]; 2]], psi: f64, tol: f64) -> usize {
    segs.iter().filter(|s| (s[0][0] - psi).abs() <= tol && (s[1][0] - psi).abs() <= tol).count()
}

#[test]
fn quadratic_dirac_portrait_nullclines() {
    let f = ToySystem2D::quadratic_dirac(0.375);
    let mut cfg = PortraitConfig::new((-4.0, 2.0), (-2.0, 2.0), 61);
    cfg.starts = vec![[1.0, 0.5], [-3.0, 1.0]];
    let p = phase_portrait(&f, &cfg).unwrap();
    let h = 0.1;
    let psi_dot = &p.nullcline(Component::PsiDot).unwrap().segments;
    let theta_dot = &p.nullcline(Component::ThetaDot).unwrap().segments;
    // the lines cross every row of cells except the ones touching θ = 0
    assert!(near_vertical_line(psi_dot, -2.0, h) >= 50, "{}", near_vertical_line(psi_dot, -2.0, h));
    assert!(near_vertical_line(theta_dot, 0.0, h) >= 50);
    assert_eq!(p.sample_trajectories.len(), 2);
    // every lattice point on the ψ-axis is an equilibrium
    assert!(p.equilibria.iter().filter(|e| e[1] == 0.0).count() >= 61);
    let svg = p.to_svg("quadratic-dirac");
    assert!(svg.starts_with("<svg") && svg.contains("polyline") && svg.contains("#d62728"));
    let csv = p.field_csv();
    assert_eq!(csv.lines().count(), 1 + 61 * 61);
    assert_eq!(csv.lines().next(), Some("psi,theta,psi_dot,theta_dot"));
    // second row: ψ one step right of the corner, same θ
    let row: Vec<f64> = csv.lines().nth(2).unwrap().split(',').map(|c| c.parse().unwrap()).collect();
    let (a, b) = f.eval(row[0], row[1]);
    assert_eq!(row, vec![-3.9, -2.0, a, b]);
}

#[test]
fn dirac_portrait() {
    let f = ToySystem2D::dirac(1.0, MassProfile::Constant(1.0));
    let mut cfg = PortraitConfig::new((-2.0, 2.0), (-2.0, 2.0), 21);
    cfg.known_equilibria = vec![[0.0, 0.0]];
    let p = phase_portrait(&f, &cfg).unwrap();
    assert_eq!(p.equilibria, vec![[0.0, 0.0]]);
    let segs = &p.nullcline(Component::PsiDot).unwrap().segments;
    assert!(!segs.is_empty());
    for s in segs {
        for q in s {
            assert!((q[0] + q[1]).abs() <= 0.2 + 1e-12, "{q:?}");
        }
    }
    for (a, v) in p.arrows.iter().zip(&p.field) {
        let n = (a[0] * a[0] + a[1] * a[1]).sqrt();
        if v == &[0.0, 0.0] {
            assert_eq!(n, 0.0);
        } else {
            assert!((n - 1.0).abs() < 1e-12);
        }
    }
    let json = serde_json::to_string(&p).unwrap();
    let back: PhasePortrait = serde_json::from_str(&json).unwrap();
    assert_eq!(back, p);
}

#[test]
fn constant_field_portrait() {
    let f = FnField::new(2, |_: &[f64]| vec![1.0, 0.0]);
    let p = phase_portrait(&f, &PortraitConfig::new((0.0, 1.0), (0.0, 1.0), 8)).unwrap();
    assert!(p.nullclines.iter().all(|n| n.segments.is_empty()));
    assert!(p.arrows.iter().all(|a| a == &[1.0, 0.0]));
    assert!(p.equilibria.is_empty());
    assert!(phase_portrait(&f, &PortraitConfig::new((0.0, 1.0), (0.0, 1.0), 7)).is_err());
}

#[test]
fn marching_squares_saddle() {
    let xs = [-1.0, 1.0];
    let ys = [-1.0, 1.0];
    // v = x·y + 0.5: positive centre joins the positive corners (0,0) and (1,1)
    let v: Vec<f64> = [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)].iter().map(|(x, y)| x * y + 0.5).collect();
    let segs = marching_squares(&xs, &ys, &v);
    assert_eq!(segs.len(), 2);
    for s in &segs {
        // each segment cuts off one of the negative corners (1,-1) or (-1,1)
        let mid = [(s[0][0] + s[1][0]) / 2.0, (s[0][1] + s[1][1]) / 2.0];
        assert!(mid[0] * mid[1] < 0.0, "{segs:?}");
    }
}
