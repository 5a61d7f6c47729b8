//! Data-parallel kernels under the current backend.
//!
//! Run once with default features (rayon) and once with
//! `--no-default-features` (sequential); both land in the same criterion
//! groups under different ids, so the report compares them side by side.
//! The rayon build additionally measures a one-thread pool.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use sgp_core::analytic::{ToyKind, ToySystem2D};
use sgp_core::dynamics::{McConfig, SgpField};
use sgp_core::gan2d::{Setup, TrainConfig};
use sgp_core::integrate::{phase_portrait, PortraitConfig};
use sgp_core::measure::MassProfile;
use sgp_core::par;
use sgp_core::stability::{jacobian_fd, qr_blocks};

fn backend() -> &'static str {
    if par::is_parallel() {
        "rayon"
    } else {
        "sequential"
    }
}

/// Runs `f` on the default backend and, for rayon builds, on one thread.
fn variants(c: &mut Criterion, group: &str, f: impl Fn() + Send + Sync) {
    let mut g = c.benchmark_group(group);
    g.sample_size(10);
    g.bench_function(BenchmarkId::from_parameter(backend()), |b| b.iter(&f));
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        g.bench_function(BenchmarkId::from_parameter("rayon-1-thread"), |b| b.iter(|| pool.install(&f)));
    }
    g.finish();
}

fn small_gan() -> (Setup, Vec<f64>, Vec<f64>) {
    let cfg = TrainConfig { hidden: vec![16, 16], ..Default::default() };
    let setup = Setup::new(&cfg).unwrap();
    let (psi, theta) = setup.init(0);
    (setup, psi, theta)
}

fn bench_jacobian(c: &mut Criterion) {
    let (setup, psi, theta) = small_gan();
    let field = SgpField { problem: setup.problem.clone(), n: 256 };
    let x: Vec<f64> = psi.iter().chain(&theta).copied().collect();
    variants(c, "jacobian_fd_gan2d", || {
        black_box(jacobian_fd(&field, &x, None, 0).unwrap());
    });
}

fn bench_blocks(c: &mut Criterion) {
    let (setup, psi, theta) = small_gan();
    variants(c, "qr_blocks_gan2d", || {
        black_box(qr_blocks(&setup.problem, &psi, &theta, McConfig::new(512, 0)).unwrap());
    });
}

fn bench_portrait(c: &mut Criterion) {
    let system = ToySystem2D::by_kind(ToyKind::QuadraticDirac, 0.375, MassProfile::Constant(1.0));
    let mut cfg = PortraitConfig::new((-4.0, 2.0), (-2.0, 2.0), 201);
    cfg.starts = (0..16).map(|i| [-3.5 + 0.3 * i as f64, 1.5 - 0.2 * i as f64]).collect();
    cfg.t_max = 50.0;
    variants(c, "phase_portrait_quadratic_dirac", || {
        black_box(phase_portrait(&system, &cfg).unwrap());
    });
}

criterion_group!(benches, bench_jacobian, bench_blocks, bench_portrait);
criterion_main!(benches);
