//! Small WGANs with the simple gradient penalty on two-dimensional targets.
//!
//! Every training step evaluates the drift of the [`SgpProblem`] built from
//! the run's networks and penalty measure and moves `(ψ, θ)` along it, so
//! the trainer and the dynamic-system analysis share one gradient path.

use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::batch::Batch;
use crate::dynamics::{penalty_value, vector_field, McConfig, SgpProblem};
use crate::error::{Error, Result};
use crate::measure::{Dependence, FiniteMeasure, ParamIndex, Params, PenaltyKind, WeakDerivativeTriple};
use crate::models::{Discriminator, MlpDiscriminator, MlpGenerator, StandardGaussian};
use crate::rng::{child_seed, stream_rng, streams};
use crate::svg::{Canvas, Document};

/// Samples a centre counts towards coverage with.
pub const MIN_SAMPLES_PER_MODE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Gauss8,
    Gauss25,
    Swissroll,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 3] = [DatasetKind::Gauss8, DatasetKind::Gauss25, DatasetKind::Swissroll];

    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetKind::Gauss8 => "gauss8",
            DatasetKind::Gauss25 => "gauss25",
            DatasetKind::Swissroll => "swissroll",
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DatasetKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown dataset '{s}' (expected gauss8, gauss25 or swissroll)")))
    }
}

/// A 2D target distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub kind: DatasetKind,
    /// Mixture centres; empty for the swiss roll.
    pub centers: Vec<[f64; 2]>,
    /// Per-component standard deviation (mixtures) or noise level.
    pub std: f64,
    /// Divisor applied to the raw swiss roll.
    pub scale: f64,
}

impl Dataset {
    pub fn new(kind: DatasetKind) -> Self {
        match kind {
            DatasetKind::Gauss8 => Dataset {
                kind,
                centers: (0..8)
                    .map(|k| {
                        let a = k as f64 * std::f64::consts::FRAC_PI_4;
                        [2.0 * a.cos(), 2.0 * a.sin()]
                    })
                    .collect(),
                std: 0.02,
                scale: 1.0,
            },
            DatasetKind::Gauss25 => Dataset {
                kind,
                centers: (-2..=2)
                    .flat_map(|i| (-2..=2).map(move |j| [2.0 * i as f64, 2.0 * j as f64]))
                    .collect(),
                std: 0.05,
                scale: 1.0,
            },
            DatasetKind::Swissroll => Dataset { kind, centers: Vec::new(), std: 0.25, scale: 7.5 },
        }
    }

    /// Default coverage radius, three component standard deviations.
    pub fn default_radius(&self) -> f64 {
        3.0 * self.std
    }

    /// Half-width of a square that holds the data comfortably.
    pub fn plot_extent(&self) -> f64 {
        match self.kind {
            DatasetKind::Gauss25 => 5.5,
            _ => 3.0,
        }
    }

    pub fn sample(&self, n: usize, seed: u64) -> Batch {
        let mut rng = stream_rng(seed, streams::MEASURE);
        let mut data = Vec::with_capacity(2 * n);
        match self.kind {
            DatasetKind::Gauss8 | DatasetKind::Gauss25 => {
                for _ in 0..n {
                    let c = self.centers[rng.gen_range(0..self.centers.len())];
                    let e0: f64 = rng.sample(StandardNormal);
                    let e1: f64 = rng.sample(StandardNormal);
                    data.push(c[0] + self.std * e0);
                    data.push(c[1] + self.std * e1);
                }
            }
            DatasetKind::Swissroll => {
                for _ in 0..n {
                    let t = 1.5 * std::f64::consts::PI * (1.0 + 2.0 * rng.gen::<f64>());
                    let e0: f64 = rng.sample(StandardNormal);
                    let e1: f64 = rng.sample(StandardNormal);
                    data.push((t * t.cos() + self.std * e0) / self.scale);
                    data.push((t * t.sin() + self.std * e1) / self.scale);
                }
            }
        }
        Batch::new(2, data)
    }
}

impl FiniteMeasure for Dataset {
    fn name(&self) -> String {
        self.kind.to_string()
    }
    fn dim(&self) -> usize {
        2
    }
    fn mass(&self, _p: Params<'_>) -> f64 {
        1.0
    }
    fn sample(&self, _p: Params<'_>, n: usize, seed: u64) -> Batch {
        Dataset::sample(self, n, seed)
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

pub fn make_dataset(kind: DatasetKind) -> Dataset {
    Dataset::new(kind)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    /// Centres with at least [`MIN_SAMPLES_PER_MODE`] samples within the radius.
    pub covered: usize,
    /// Fraction of samples within the radius of some centre.
    pub high_quality_fraction: f64,
}

pub fn mode_coverage(samples: &Batch, centers: &[[f64; 2]], radius: f64) -> Result<Coverage> {
    if samples.is_empty() {
        return Err(Error::config("mode coverage needs at least one sample"));
    }
    if !(radius > 0.0) {
        return Err(Error::config(format!("coverage radius must be positive, got {radius}")));
    }
    let r2 = radius * radius;
    let mut counts = vec![0usize; centers.len()];
    let mut good = 0usize;
    for x in samples.rows() {
        let mut hit = false;
        for (c, n) in centers.iter().zip(counts.iter_mut()) {
            if (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) <= r2 {
                *n += 1;
                hit = true;
            }
        }
        good += hit as usize;
    }
    Ok(Coverage {
        covered: counts.iter().filter(|&&n| n >= MIN_SAMPLES_PER_MODE).count(),
        high_quality_fraction: good as f64 / samples.len() as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    /// Plain simultaneous gradient steps along the drift.
    Gd,
    /// Adaptive moments on the drift, per player.
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam { beta1: 0.5, beta2: 0.9, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub dataset: DatasetKind,
    pub penalty_kind: PenaltyKind,
    /// Anchor for `g_anc`; defaults to `(2, −1)` for that kind.
    pub anchor: Option<[f64; 2]>,
    pub rho: f64,
    pub lr: f64,
    pub batch: usize,
    pub iters: usize,
    pub d_steps_per_g: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    pub hidden: Vec<usize>,
    pub latent_dim: usize,
    pub metrics_every: usize,
    /// Generator draws used for coverage metrics and scatter plots.
    pub eval_samples: usize,
    pub checkpoint_every: usize,
    pub scatter_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dataset: DatasetKind::Gauss8,
            penalty_kind: PenaltyKind::Gp,
            anchor: None,
            rho: 10.0,
            lr: 1e-4,
            batch: 256,
            iters: 30_000,
            d_steps_per_g: 1,
            seed: 0,
            optimizer: Optimizer::Gd,
            hidden: vec![64, 64, 64],
            latent_dim: 2,
            metrics_every: 100,
            eval_samples: 2048,
            checkpoint_every: 5000,
            scatter_every: 5000,
        }
    }
}

pub const DEFAULT_ANCHOR: [f64; 2] = [2.0, -1.0];

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::config(m.to_string()));
        if !(self.rho >= 0.0) || !self.rho.is_finite() {
            return bad("rho must be finite and non-negative");
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return bad("lr must be positive");
        }
        if self.batch == 0 || self.d_steps_per_g == 0 || self.metrics_every == 0 || self.eval_samples == 0 {
            return bad("batch, d_steps_per_g, metrics_every and eval_samples must be at least 1");
        }
        if self.latent_dim == 0 || self.hidden.contains(&0) {
            return bad("layer widths must be positive");
        }
        if self.anchor.is_some() && self.penalty_kind != PenaltyKind::GAnc {
            return bad("anchor is only used by penalty_kind g_anc");
        }
        Ok(())
    }

    pub fn resolved_anchor(&self) -> Option<[f64; 2]> {
        (self.penalty_kind == PenaltyKind::GAnc).then(|| self.anchor.unwrap_or(DEFAULT_ANCHOR))
    }
}

/// Networks, data and penalty of one run.
#[derive(Debug, Clone)]
pub struct Setup {
    pub problem: SgpProblem,
    pub dataset: Dataset,
    pub discriminator: Arc<MlpDiscriminator>,
    pub generator: Arc<MlpGenerator>,
}

impl Setup {
    pub fn new(cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let dataset = make_dataset(cfg.dataset);
        let discriminator = Arc::new(MlpDiscriminator::new(2, &cfg.hidden));
        let generator = Arc::new(MlpGenerator::new(cfg.latent_dim, &cfg.hidden, 2));
        let data: Arc<dyn FiniteMeasure> = Arc::new(dataset.clone());
        let latent: Arc<dyn FiniteMeasure> = Arc::new(StandardGaussian { dim: cfg.latent_dim });
        let base = SgpProblem::new(discriminator.clone(), generator.clone(), data.clone(), latent, data, cfg.rho)?;
        let penalty = base.table1_penalty(cfg.penalty_kind, cfg.resolved_anchor().map(|a| a.to_vec()))?;
        Ok(Setup { problem: base.with_penalty(penalty)?, dataset, discriminator, generator })
    }

    /// Initial `(ψ, θ)` for a root seed.
    pub fn init(&self, seed: u64) -> (Vec<f64>, Vec<f64>) {
        (self.discriminator.net.init_params(child_seed(seed, 1)), self.generator.net.init_params(child_seed(seed, 2)))
    }

    pub fn generate(&self, theta: &[f64], n: usize, seed: u64) -> Batch {
        self.problem.model_distribution().sample(Params::new(&[], theta), n, seed)
    }
}

/// Seed of the `k`-th drift evaluation of a run.
pub fn step_seed(root: u64, k: u64) -> u64 {
    child_seed(child_seed(root, 3), k)
}

fn eval_seed(root: u64, iter: u64) -> u64 {
    child_seed(child_seed(root, 4), iter)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub iter: usize,
    /// `E_{p_d}[D] − E_{p_θ}[D]` on a fresh batch.
    pub wgan_loss: f64,
    /// `E_μ[‖∇_x D‖²]` on the same batch.
    pub penalty_value: f64,
    /// `None` for targets without modes.
    pub mode_coverage: Option<usize>,
    pub high_quality_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub config: TrainConfig,
    pub dataset: Dataset,
    pub rows: Vec<MetricsRow>,
    pub psi: Vec<f64>,
    pub theta: Vec<f64>,
}

impl TrainRecord {
    pub fn last(&self) -> &MetricsRow {
        self.rows.last().expect("a record always holds the initial row")
    }

    pub fn to_csv(&self) -> String {
        rows_csv(&self.rows)
    }
}

fn rows_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from("iter,wgan_loss,penalty_value,mode_coverage,high_quality_fraction\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.iter,
            r.wgan_loss,
            r.penalty_value,
            r.mode_coverage.map_or(String::new(), |c| c.to_string()),
            r.high_quality_fraction.map_or(String::new(), |f| f.to_string())
        ));
    }
    out
}

fn metrics(setup: &Setup, cfg: &TrainConfig, psi: &[f64], theta: &[f64], iter: usize) -> Result<MetricsRow> {
    let seed = eval_seed(cfg.seed, iter as u64);
    let mc = McConfig::new(cfg.batch, seed);
    let (x_d, _, x_g) = setup.problem.draws(psi, theta, mc);
    let d = setup.discriminator.as_ref();
    let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    let wgan_loss = mean(d.value(&x_d, psi)) - mean(d.value(&x_g, psi));
    let penalty = penalty_value(&setup.problem, psi, theta, mc)?;
    if !wgan_loss.is_finite() || !penalty.is_finite() {
        return Err(Error::numerical(format!("training metrics at iteration {iter}"), &[wgan_loss, penalty]));
    }
    let (mode_coverage, high_quality_fraction) = if setup.dataset.centers.is_empty() {
        (None, None)
    } else {
        let samples = setup.generate(theta, cfg.eval_samples, child_seed(seed, 1));
        let c = mode_coverage(&samples, &setup.dataset.centers, setup.dataset.default_radius())?;
        (Some(c.covered), Some(c.high_quality_fraction))
    };
    Ok(MetricsRow { iter, wgan_loss, penalty_value: penalty, mode_coverage, high_quality_fraction })
}

struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Moments {
    fn new(n: usize) -> Self {
        Moments { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, x: &mut [f64], drift: &[f64], lr: f64, opt: Optimizer) {
        match opt {
            Optimizer::Gd => {
                for (x, g) in x.iter_mut().zip(drift) {
                    *x += lr * g;
                }
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                self.t += 1;
                let c1 = 1.0 - beta1.powi(self.t);
                let c2 = 1.0 - beta2.powi(self.t);
                for i in 0..x.len() {
                    let g = drift[i];
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
                    x[i] += lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + eps);
                }
            }
        }
    }
}

/// Where a run writes its artifacts.
#[derive(Debug, Clone)]
pub struct OutputDir {
    pub path: PathBuf,
}

impl OutputDir {
    pub fn new(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        fs::create_dir_all(&path)?;
        Ok(OutputDir { path })
    }

    fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    /// Discriminator and generator layer sizes.
    pub arch: CheckpointArch,
    pub iter: usize,
    pub seed: u64,
    pub psi_len: usize,
    pub theta_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointArch {
    pub discriminator: Vec<usize>,
    pub generator: Vec<usize>,
}

/// Checkpoint layout: `u64` little-endian header length, the JSON header,
/// then `[ψ; θ]` as little-endian `f64`.
pub fn write_checkpoint(path: &Path, header: &CheckpointHeader, psi: &[f64], theta: &[f64]) -> Result<()> {
    let json = serde_json::to_vec(header)?;
    let mut buf = Vec::with_capacity(8 + json.len() + 8 * (psi.len() + theta.len()));
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    for v in psi.iter().chain(theta) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<(CheckpointHeader, Vec<f64>, Vec<f64>)> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    let corrupt = || Error::config(format!("{} is not a checkpoint", path.display()));
    let len = u64::from_le_bytes(buf.get(..8).ok_or_else(corrupt)?.try_into().map_err(|_| corrupt())?) as usize;
    let header: CheckpointHeader = serde_json::from_slice(buf.get(8..8 + len).ok_or_else(corrupt)?)?;
    let body = &buf[8 + len..];
    if body.len() != 8 * (header.psi_len + header.theta_len) {
        return Err(corrupt());
    }
    let values: Vec<f64> = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    let (psi, theta) = values.split_at(header.psi_len);
    Ok((header, psi.to_vec(), theta.to_vec()))
}

/// Scatter plot of generator samples over the target's centres.
pub fn scatter_svg(dataset: &Dataset, samples: &Batch, title: &str) -> String {
    let e = dataset.plot_extent();
    let mut doc = Document::new(Canvas::new((-e, e), (-e, e)), title);
    for c in &dataset.centers {
        doc.circle(*c, 4.0, "#d62728");
    }
    for x in samples.rows() {
        if x[0].abs() <= e && x[1].abs() <= e {
            doc.circle([x[0], x[1]], 1.2, "#1f77b4");
        }
    }
    doc.finish()
}

/// Train one run. With `out`, writes `metadata.json`, periodic
/// checkpoints and scatter plots, and `record.csv` (also when the run
/// aborts on a non-finite value, in which case the last checkpoint stays).
pub fn train(cfg: &TrainConfig, out: Option<&OutputDir>) -> Result<TrainRecord> {
    let setup = Setup::new(cfg)?;
    let (mut psi, mut theta) = setup.init(cfg.seed);
    if let Some(o) = out {
        let meta = serde_json::json!({ "config": cfg, "dataset": setup.dataset, "anchor": cfg.resolved_anchor() });
        fs::write(o.file("metadata.json"), serde_json::to_string_pretty(&meta)?)?;
    }
    let arch = CheckpointArch {
        discriminator: setup.discriminator.net.sizes().to_vec(),
        generator: setup.generator.net.sizes().to_vec(),
    };
    let save = |iter: usize, psi: &[f64], theta: &[f64]| -> Result<()> {
        let Some(o) = out else { return Ok(()) };
        if cfg.checkpoint_every > 0 && iter.is_multiple_of(cfg.checkpoint_every) {
            let header = CheckpointHeader {
                arch: arch.clone(),
                iter,
                seed: cfg.seed,
                psi_len: psi.len(),
                theta_len: theta.len(),
            };
            write_checkpoint(&o.file(&format!("checkpoint_{iter:06}.bin")), &header, psi, theta)?;
        }
        if cfg.scatter_every > 0 && iter.is_multiple_of(cfg.scatter_every) {
            let samples = setup.generate(theta, cfg.eval_samples, child_seed(eval_seed(cfg.seed, iter as u64), 1));
            let title = format!("{} / {} / iter {iter}", cfg.dataset, cfg.penalty_kind);
            fs::write(o.file(&format!("samples_{iter:06}.svg")), scatter_svg(&setup.dataset, &samples, &title))?;
        }
        Ok(())
    };
    let finish = |rows: &[MetricsRow]| -> Result<()> {
        if let Some(o) = out {
            fs::write(o.file("record.csv"), rows_csv(rows))?;
        }
        Ok(())
    };

    let mut rows = vec![metrics(&setup, cfg, &psi, &theta, 0)?];
    save(0, &psi, &theta)?;
    let mut opt_d = Moments::new(psi.len());
    let mut opt_g = Moments::new(theta.len());
    let mut k = 0u64;
    for iter in 1..=cfg.iters {
        let result = (|| -> Result<()> {
            for s in 0..cfg.d_steps_per_g {
                let drift = vector_field(&setup.problem, &psi, &theta, McConfig::new(cfg.batch, step_seed(cfg.seed, k)))?;
                k += 1;
                opt_d.step(&mut psi, &drift.psi, cfg.lr, cfg.optimizer);
                if s + 1 == cfg.d_steps_per_g {
                    opt_g.step(&mut theta, &drift.theta, cfg.lr, cfg.optimizer);
                }
            }
            if iter % cfg.metrics_every == 0 || iter == cfg.iters {
                rows.push(metrics(&setup, cfg, &psi, &theta, iter)?);
            }
            save(iter, &psi, &theta)
        })();
        if let Err(e) = result {
            finish(&rows)?;
            return Err(e);
        }
    }
    finish(&rows)?;
    Ok(TrainRecord { config: cfg.clone(), dataset: setup.dataset, rows, psi, theta })
}

#[cfg(test)]
mod tests;
