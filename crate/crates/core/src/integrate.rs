//! Trajectories of the drift: fixed-step RK4 for the continuous system,
//! explicit Euler for simultaneous gradient descent, and 2D phase portraits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::rng::child_seed;
use crate::svg::{Canvas, Document};

/// States with a norm above this count as diverged.
pub const DIVERGENCE_NORM: f64 = 1e6;
/// Default distance to the target that counts as converged.
pub const CONVERGENCE_TOL: f64 = 1e-4;
/// Lattice points whose drift norm is at most this are marked equilibria.
pub const EQUILIBRIUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalReason {
    Converged,
    MaxTime,
    Diverged,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub terminal_reason: TerminalReason,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// CSV with a `t` column followed by one column per component, named
    /// by `names` or `x0, x1, ...` when `names` is too short.
    pub fn to_csv(&self, names: &[&str]) -> String {
        let dim = self.states.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((0..dim).map(|i| names.get(i).map_or_else(|| format!("x{i}"), |s| s.to_string())));
        let mut out = header.join(",");
        out.push('\n');
        for (t, s) in self.times.iter().zip(&self.states) {
            out.push_str(&t.to_string());
            for v in s {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Stop as soon as the state is within `tol` of `target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub target: Vec<f64>,
    pub tol: f64,
}

impl StopRule {
    pub fn new(target: Vec<f64>) -> Self {
        StopRule { target, tol: CONVERGENCE_TOL }
    }

    fn reached(&self, x: &[f64]) -> bool {
        dist(x, &self.target) <= self.tol
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn axpy(x: &[f64], a: f64, k: &[f64]) -> Vec<f64> {
    x.iter().zip(k).map(|(x, k)| x + a * k).collect()
}

fn check_start(field: &dyn VectorField, x0: &[f64], stop: Option<&StopRule>) -> Result<()> {
    if x0.len() != field.dim() {
        return Err(Error::config(format!("start has dimension {}, field has {}", x0.len(), field.dim())));
    }
    if let Some(s) = stop {
        if s.target.len() != x0.len() || !(s.tol > 0.0) {
            return Err(Error::config("stop rule needs a target of the field's dimension and tol > 0"));
        }
    }
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(Error::config("start point must be finite"));
    }
    Ok(())
}

/// Status of a freshly accepted state, `None` to keep going.
fn classify(x: &[f64], stop: Option<&StopRule>) -> Option<TerminalReason> {
    if !x.iter().all(|v| v.is_finite()) {
        Some(TerminalReason::NumericalFailure)
    } else if norm(x) > DIVERGENCE_NORM {
        Some(TerminalReason::Diverged)
    } else if stop.is_some_and(|s| s.reached(x)) {
        Some(TerminalReason::Converged)
    } else {
        None
    }
}

/// Classical RK4 with fixed step `dt` up to `t_max` (the last step is
/// shortened to land on `t_max`). Step `k` evaluates the field with seed
/// `child_seed(seed, k)` at all four stages.
pub fn integrate_ode(
    field: &dyn VectorField,
    x0: &[f64],
    dt: f64,
    t_max: f64,
    stop: Option<&StopRule>,
    seed: u64,
) -> Result<Trajectory> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::config(format!("dt must be positive, got {dt}")));
    }
    if !(t_max >= dt) || !t_max.is_finite() {
        return Err(Error::config(format!("t_max must be at least dt, got {t_max}")));
    }
    check_start(field, x0, stop)?;
    let mut traj = Trajectory { times: vec![0.0], states: vec![x0.to_vec()], terminal_reason: TerminalReason::MaxTime };
    if let Some(reason) = classify(x0, stop) {
        traj.terminal_reason = reason;
        return Ok(traj);
    }
    let mut x = x0.to_vec();
    let mut k = 0u64;
    let end = t_max * (1.0 - 1e-12);
    loop {
        let t = k as f64 * dt;
        if t >= end {
            break;
        }
        let h = dt.min(t_max - t);
        let s = child_seed(seed, k);
        let step = (|| -> Result<Vec<f64>> {
            let k1 = field.eval(&x, s)?;
            let k2 = field.eval(&axpy(&x, h / 2.0, &k1), s)?;
            let k3 = field.eval(&axpy(&x, h / 2.0, &k2), s)?;
            let k4 = field.eval(&axpy(&x, h, &k3), s)?;
            Ok((0..x.len()).map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
        })();
        let next = match step {
            Ok(v) => v,
            Err(Error::NumericalFailure { .. }) => {
                traj.terminal_reason = TerminalReason::NumericalFailure;
                return Ok(traj);
            }
            Err(e) => return Err(e),
        };
        k += 1;
        traj.times.push(if h < dt { t_max } else { k as f64 * dt });
        traj.states.push(next.clone());
        x = next;
        if let Some(reason) = classify(&x, stop) {
            traj.terminal_reason = reason;
            return Ok(traj);
        }
    }
    Ok(traj)
}

/// Simultaneous gradient descent `x ← x + lr · field(x)`; step `k` uses
/// seed `child_seed(seed, k)` and is recorded at time `k · lr`.
pub fn simultaneous_gd(
    field: &dyn VectorField,
    x0: &[f64],
    lr: f64,
    steps: usize,
    stop: Option<&StopRule>,
    seed: u64,
) -> Result<Trajectory> {
    if !(lr > 0.0) || !lr.is_finite() {
        return Err(Error::config(format!("learning rate must be positive, got {lr}")));
    }
    check_start(field, x0, stop)?;
    let mut traj = Trajectory { times: vec![0.0], states: vec![x0.to_vec()], terminal_reason: TerminalReason::MaxTime };
    if let Some(reason) = classify(x0, stop) {
        traj.terminal_reason = reason;
        return Ok(traj);
    }
    let mut x = x0.to_vec();
    for k in 0..steps {
        let v = match field.eval(&x, child_seed(seed, k as u64)) {
            Ok(v) => v,
            Err(Error::NumericalFailure { .. }) => {
                traj.terminal_reason = TerminalReason::NumericalFailure;
                return Ok(traj);
            }
            Err(e) => return Err(e),
        };
        x = axpy(&x, lr, &v);
        traj.times.push((k + 1) as f64 * lr);
        traj.states.push(x.clone());
        if let Some(reason) = classify(&x, stop) {
            traj.terminal_reason = reason;
            return Ok(traj);
        }
    }
    Ok(traj)
}

/// Which drift component a nullcline belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    PsiDot,
    ThetaDot,
}

/// Zero set of one drift component as line segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nullcline {
    pub component: Component,
    pub segments: Vec<[[f64; 2]; 2]>,
}

/// Portrait options besides the box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortraitConfig {
    pub psi_range: (f64, f64),
    pub theta_range: (f64, f64),
    /// Lattice points per axis (at least 8).
    pub resolution: (usize, usize),
    pub starts: Vec<[f64; 2]>,
    pub dt: f64,
    pub t_max: f64,
    pub seed: u64,
    /// Equilibria known in closed form, drawn when inside the box.
    pub known_equilibria: Vec<[f64; 2]>,
}

impl PortraitConfig {
    pub fn new(psi_range: (f64, f64), theta_range: (f64, f64), resolution: usize) -> Self {
        PortraitConfig {
            psi_range,
            theta_range,
            resolution: (resolution, resolution),
            starts: Vec::new(),
            dt: 0.01,
            t_max: 20.0,
            seed: 0,
            known_equilibria: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePortrait {
    pub psi: Vec<f64>,
    pub theta: Vec<f64>,
    /// Drift at lattice point `(psi[i], theta[j])`, stored at `j * psi.len() + i`.
    pub field: Vec<[f64; 2]>,
    /// Unit directions of `field`, zero at equilibria.
    pub arrows: Vec<[f64; 2]>,
    pub nullclines: Vec<Nullcline>,
    pub equilibria: Vec<[f64; 2]>,
    pub sample_trajectories: Vec<Trajectory>,
}

fn linspace(range: (f64, f64), n: usize) -> Vec<f64> {
    (0..n).map(|i| range.0 + (range.1 - range.0) * i as f64 / (n - 1) as f64).collect()
}

/// Lattice sampling, nullclines by marching squares on each component's
/// sign, and one RK4 trajectory per start (seed `child_seed(seed, i)`).
pub fn phase_portrait(field: &dyn VectorField, cfg: &PortraitConfig) -> Result<PhasePortrait> {
    if field.dim() != 2 {
        return Err(Error::config("phase portraits need a two-dimensional field"));
    }
    let (nx, ny) = cfg.resolution;
    if nx < 8 || ny < 8 {
        return Err(Error::config("portrait resolution must be at least 8 per axis"));
    }
    if !(cfg.psi_range.1 > cfg.psi_range.0) || !(cfg.theta_range.1 > cfg.theta_range.0) {
        return Err(Error::config("portrait box must have positive extent"));
    }
    let psi = linspace(cfg.psi_range, nx);
    let theta = linspace(cfg.theta_range, ny);
    let values = crate::par::map_range(nx * ny, |idx| {
        let (i, j) = (idx % nx, idx / nx);
        field.eval(&[psi[i], theta[j]], cfg.seed).map(|v| [v[0], v[1]])
    });
    let values: Vec<[f64; 2]> = values.into_iter().collect::<Result<_>>()?;
    let arrows = values
        .iter()
        .map(|v| {
            let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
            if n <= EQUILIBRIUM_TOL {
                [0.0, 0.0]
            } else {
                [v[0] / n, v[1] / n]
            }
        })
        .collect();

    let nullclines = [Component::PsiDot, Component::ThetaDot]
        .into_iter()
        .map(|component| {
            let c = if component == Component::PsiDot { 0 } else { 1 };
            let grid: Vec<f64> = values.iter().map(|v| v[c]).collect();
            Nullcline { component, segments: marching_squares(&psi, &theta, &grid) }
        })
        .collect();

    let inside = |p: &[f64; 2]| {
        p[0] >= cfg.psi_range.0 && p[0] <= cfg.psi_range.1 && p[1] >= cfg.theta_range.0 && p[1] <= cfg.theta_range.1
    };
    let mut equilibria: Vec<[f64; 2]> = cfg.known_equilibria.iter().copied().filter(inside).collect();
    for (idx, v) in values.iter().enumerate() {
        if (v[0] * v[0] + v[1] * v[1]).sqrt() <= EQUILIBRIUM_TOL {
            let p = [psi[idx % nx], theta[idx / nx]];
            if !equilibria.iter().any(|e| (e[0] - p[0]).abs() < 1e-12 && (e[1] - p[1]).abs() < 1e-12) {
                equilibria.push(p);
            }
        }
    }

    let starts: Vec<(usize, [f64; 2])> = cfg.starts.iter().copied().enumerate().collect();
    let trajs = crate::par::map_slice(&starts, |(i, s)| integrate_ode(field, s, cfg.dt, cfg.t_max, None, child_seed(cfg.seed, *i as u64)));
    let sample_trajectories = trajs.into_iter().collect::<Result<_>>()?;

    Ok(PhasePortrait { psi, theta, field: values, arrows, nullclines, equilibria, sample_trajectories })
}

/// Zero contour of `v` (lattice values, row index over `ys`) as segments.
/// Points with `v > 0` are positive, everything else non-positive; saddle
/// cells are split by the sign of the cell average.
pub fn marching_squares(xs: &[f64], ys: &[f64], v: &[f64]) -> Vec<[[f64; 2]; 2]> {
    let nx = xs.len();
    let at = |i: usize, j: usize| v[j * nx + i];
    let cross = |a: [f64; 2], b: [f64; 2], va: f64, vb: f64| -> [f64; 2] {
        let t = if va == vb { 0.5 } else { (va / (va - vb)).clamp(0.0, 1.0) };
        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
    };
    let mut segs = Vec::new();
    for j in 0..ys.len().saturating_sub(1) {
        for i in 0..nx.saturating_sub(1) {
            // corners counter-clockwise from bottom-left
            let p = [[xs[i], ys[j]], [xs[i + 1], ys[j]], [xs[i + 1], ys[j + 1]], [xs[i], ys[j + 1]]];
            let val = [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)];
            let pos: Vec<bool> = val.iter().map(|&x| x > 0.0).collect();
            let case = pos.iter().enumerate().fold(0, |acc, (k, &b)| acc | ((b as usize) << k));
            if case == 0 || case == 15 {
                continue;
            }
            // crossing point on edge k (between corner k and k+1)
            let edge = |k: usize| cross(p[k], p[(k + 1) % 4], val[k], val[(k + 1) % 4]);
            let crossed: Vec<usize> = (0..4).filter(|&k| pos[k] != pos[(k + 1) % 4]).collect();
            if crossed.len() == 2 {
                segs.push([edge(crossed[0]), edge(crossed[1])]);
            } else if crossed.len() == 4 {
                let centre_pos = val.iter().sum::<f64>() / 4.0 > 0.0;
                // cut off the two corners whose sign differs from the centre
                if centre_pos == pos[0] {
                    segs.push([edge(0), edge(1)]);
                    segs.push([edge(2), edge(3)]);
                } else {
                    segs.push([edge(3), edge(0)]);
                    segs.push([edge(1), edge(2)]);
                }
            }
        }
    }
    segs
}

impl PhasePortrait {
    /// The lattice as CSV with columns `psi,theta,psi_dot,theta_dot`.
    pub fn field_csv(&self) -> String {
        let mut out = String::from("psi,theta,psi_dot,theta_dot\n");
        for (j, t) in self.theta.iter().enumerate() {
            for (i, p) in self.psi.iter().enumerate() {
                let v = self.field[j * self.psi.len() + i];
                let cells = [*p, *t, v[0], v[1]].map(|x| (x + 0.0).to_string());
                out.push_str(&cells.join(","));
                out.push('\n');
            }
        }
        out
    }

    pub fn nullcline(&self, component: Component) -> Option<&Nullcline> {
        self.nullclines.iter().find(|n| n.component == component)
    }

    pub fn to_svg(&self, title: &str) -> String {
        let canvas = Canvas::new(
            (self.psi[0], *self.psi.last().unwrap_or(&1.0)),
            (self.theta[0], *self.theta.last().unwrap_or(&1.0)),
        );
        let mut doc = Document::new(canvas, title);
        let nx = self.psi.len();
        let spacing = canvas.x_scale() * (self.psi.get(1).unwrap_or(&1.0) - self.psi[0]);
        let len = (0.8 * spacing).clamp(4.0, 18.0);
        for (idx, a) in self.arrows.iter().enumerate() {
            let p = [self.psi[idx % nx], self.theta[idx / nx]];
            doc.arrow(p, *a, len, "#9aa4b1");
        }
        for n in &self.nullclines {
            let color = match n.component {
                Component::PsiDot => "#d62728",
                Component::ThetaDot => "#1f77b4",
            };
            for s in &n.segments {
                doc.line(s[0], s[1], color, 1.8);
            }
        }
        for t in &self.sample_trajectories {
            let pts: Vec<[f64; 2]> = t.states.iter().filter(|s| s.iter().all(|v| v.is_finite())).map(|s| [s[0], s[1]]).collect();
            doc.polyline(&pts, "#2ca02c", 1.2);
            if let Some(p) = pts.first() {
                doc.circle(*p, 2.5, "#2ca02c");
            }
        }
        for e in &self.equilibria {
            doc.circle(*e, 3.5, "#000000");
        }
        doc.finish()
    }
}

#[cfg(test)]
mod tests;
