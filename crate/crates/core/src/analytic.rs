//! Closed-form toy systems: the Dirac GAN with a general finite penalty
//! measure, the quadratic-discriminator GAN on uniform data, and the
//! quadratic-discriminator Dirac GAN that never reaches its equilibrium.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

/// `(ψ, θ) ↦ (ψ̇, θ̇)`.
pub type Field2 = dyn Fn(f64, f64) -> (f64, f64) + Send + Sync;

/// Vector field `ψ̇ = −θ − (ρ/2)(2ψM + ψ²∂_ψM)`, `θ̇ = ψ` of the Dirac GAN
/// penalized on `μ_{ψ,θ}` with mass `M`.
pub fn dirac_gan_field<M, G>(psi: f64, theta: f64, rho: f64, mass: M, mass_grad_psi: G) -> (f64, f64)
where
    M: Fn(f64, f64) -> f64,
    G: Fn(f64, f64) -> f64,
{
    let m = mass(psi, theta);
    let dm = mass_grad_psi(psi, theta);
    (-theta - 0.5 * rho * (2.0 * psi * m + psi * psi * dm), psi)
}

/// Lyapunov function `L = ψ² + θ²` and its time derivative along the Dirac
/// GAN flow, `L̇ = −ρψ²(2M + ψ∂_ψM)`.
pub fn dirac_gan_lyapunov<M, G>(psi: f64, theta: f64, rho: f64, mass: M, mass_grad_psi: G) -> (f64, f64)
where
    M: Fn(f64, f64) -> f64,
    G: Fn(f64, f64) -> f64,
{
    let l = psi * psi + theta * theta;
    let ldot = -rho * psi * psi * (2.0 * mass(psi, theta) + psi * mass_grad_psi(psi, theta));
    (l, ldot)
}

/// Radius of the largest closed disk about the origin on which
/// `2M + ψ∂_ψM ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "radius", rename_all = "snake_case")]
pub enum BasinRadius {
    Finite(f64),
    /// The condition holds on the whole searched disk.
    Infinite,
}

impl BasinRadius {
    pub fn value(&self) -> f64 {
        match self {
            BasinRadius::Finite(r) => *r,
            BasinRadius::Infinite => f64::INFINITY,
        }
    }
}

/// Points on the circle of radius `r` used by the basin search.
pub const CIRCLE_POINTS: usize = 10_000;
/// Default bisection tolerance of `basin_radius`.
pub const BASIN_TOL: f64 = 1e-3;

fn circle_min<M, G>(r: f64, mass: &M, mass_grad_psi: &G) -> Result<f64>
where
    M: Fn(f64, f64) -> f64 + Sync,
    G: Fn(f64, f64) -> f64 + Sync,
{
    let vals = par::map_range(CIRCLE_POINTS, |k| {
        let a = std::f64::consts::TAU * k as f64 / CIRCLE_POINTS as f64;
        let (psi, theta) = (r * a.cos(), r * a.sin());
        let m = mass(psi, theta);
        (psi, theta, m, 2.0 * m + psi * mass_grad_psi(psi, theta))
    });
    let mut min = f64::INFINITY;
    for (psi, theta, m, c) in vals {
        if m < 0.0 || !m.is_finite() {
            return Err(Error::InvalidMeasure { mass: m, point: vec![psi, theta] });
        }
        if !c.is_finite() {
            return Err(Error::numerical("basin condition", &[psi, theta]));
        }
        min = min.min(c);
    }
    Ok(min)
}

/// Largest `η ≤ search_max` such that `2M + ψ∂_ψM ≥ 0` on the disk of radius
/// `η`, found by bisection to `tol`. Each candidate disk is checked on a
/// radial ladder of circles, each with [`CIRCLE_POINTS`] angles.
pub fn basin_radius<M, G>(mass: M, mass_grad_psi: G, search_max: f64, tol: f64) -> Result<BasinRadius>
where
    M: Fn(f64, f64) -> f64 + Sync,
    G: Fn(f64, f64) -> f64 + Sync,
{
    if !(search_max > 0.0) || !(tol > 0.0) {
        return Err(Error::config("basin search needs positive search_max and tol"));
    }
    // Radial ladder with spacing tol/2; the first violating circle brackets R.
    let rings = ((search_max / (0.5 * tol)).ceil() as usize).max(1);
    let mut last_ok = 0.0;
    let mut first_bad = None;
    for i in 0..=rings {
        let r = search_max * i as f64 / rings as f64;
        if circle_min(r, &mass, &mass_grad_psi)? >= 0.0 {
            last_ok = r;
        } else {
            first_bad = Some(r);
            break;
        }
    }
    let Some(mut hi) = first_bad else {
        return Ok(BasinRadius::Infinite);
    };
    let mut lo = last_ok;
    while hi - lo > 0.25 * tol {
        let mid = 0.5 * (lo + hi);
        if circle_min(mid, &mass, &mass_grad_psi)? >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(BasinRadius::Finite(lo))
}

/// `ψ̇ = 1/3 − θ²/3 − 4ρψ E_{μ_θ}[x²]`, `θ̇ = 2ψθ/3` for `D = ψx²`,
/// `p_d = U(−1,1)`, `p_θ = U(−|θ|,|θ|)`.
pub fn quadratic_gan_field<S>(psi: f64, theta: f64, rho: f64, second_moment: S) -> (f64, f64)
where
    S: Fn(f64) -> f64,
{
    (
        1.0 / 3.0 - theta * theta / 3.0 - 4.0 * rho * psi * second_moment(theta),
        2.0 * psi * theta / 3.0,
    )
}

/// Eigenvalues `−2ρm₂ ± √(4ρ²m₂² − 4/9)` of the quadratic GAN linearized at
/// `(0, ±1)`, larger real part first.
pub fn quadratic_gan_spectrum(rho: f64, m2: f64) -> (Complex64, Complex64) {
    let centre = Complex64::new(-2.0 * rho * m2, 0.0);
    let disc = Complex64::new(4.0 * rho * rho * m2 * m2 - 4.0 / 9.0, 0.0).sqrt();
    (centre + disc, centre - disc)
}

/// `ψ̇ = −θ² − (4/3)ρψθ²`, `θ̇ = 2ψθ` for `D₂ = ψx²` on the Dirac GAN with
/// the interpolation penalty measure.
pub fn quadratic_dirac_field(psi: f64, theta: f64, rho: f64) -> (f64, f64) {
    let t2 = theta * theta;
    (-t2 - 4.0 / 3.0 * rho * psi * t2, 2.0 * psi * theta)
}

/// The two vertical nullclines `ψ = 0` (where θ̇ vanishes) and
/// `ψ = −3/(4ρ)` (where ψ̇ vanishes off the axis).
pub fn quadratic_dirac_nullclines(rho: f64) -> [f64; 2] {
    [0.0, -3.0 / (4.0 * rho)]
}

/// Toy systems addressable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ToyKind {
    Dirac,
    Quadratic,
    QuadraticDirac,
}

impl std::str::FromStr for ToyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dirac" => Ok(ToyKind::Dirac),
            "quadratic" => Ok(ToyKind::Quadratic),
            "quadratic-dirac" => Ok(ToyKind::QuadraticDirac),
            other => Err(Error::config(format!("unknown toy system `{other}`"))),
        }
    }
}

impl std::fmt::Display for ToyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ToyKind::Dirac => "dirac",
            ToyKind::Quadratic => "quadratic",
            ToyKind::QuadraticDirac => "quadratic-dirac",
        })
    }
}

/// A named planar system with its known equilibria.
pub struct ToySystem2D {
    pub name: String,
    pub field: Box<Field2>,
    pub equilibria: Vec<(f64, f64)>,
}

impl std::fmt::Debug for ToySystem2D {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ToySystem2D")
            .field("name", &self.name)
            .field("equilibria", &self.equilibria)
            .finish()
    }
}

impl ToySystem2D {
    pub fn eval(&self, psi: f64, theta: f64) -> (f64, f64) {
        (self.field)(psi, theta)
    }

    /// Dirac GAN with mass profile `M`.
    pub fn dirac(rho: f64, mass: crate::measure::MassProfile) -> Self {
        let m = move |psi: f64, theta: f64| mass.value(crate::measure::Params::new(&[psi], &[theta]));
        let dm = move |psi: f64, theta: f64| {
            mass.partial(crate::measure::Params::new(&[psi], &[theta]), crate::measure::ParamIndex::Psi(0))
        };
        ToySystem2D {
            name: "dirac".into(),
            field: Box::new(move |p, t| dirac_gan_field(p, t, rho, m, dm)),
            equilibria: vec![(0.0, 0.0)],
        }
    }

    /// Quadratic GAN with penalty second moment `m₂(θ) = E_{μ_θ}[x²]`.
    pub fn quadratic(rho: f64, second_moment: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ToySystem2D {
            name: "quadratic".into(),
            field: Box::new(move |p, t| quadratic_gan_field(p, t, rho, &second_moment)),
            equilibria: vec![(0.0, 1.0), (0.0, -1.0)],
        }
    }

    /// Quadratic GAN penalized on `U(−|θ|,|θ|)`, where `m₂(θ) = θ²/3`.
    pub fn quadratic_symmetric(rho: f64) -> Self {
        Self::quadratic(rho, |t| t * t / 3.0)
    }

    /// Quadratic Dirac GAN; `equilibria` lists sample points of the ψ-axis.
    pub fn quadratic_dirac(rho: f64) -> Self {
        ToySystem2D {
            name: "quadratic-dirac".into(),
            field: Box::new(move |p, t| quadratic_dirac_field(p, t, rho)),
            equilibria: vec![(-3.0 / (4.0 * rho), 0.0), (0.0, 0.0), (1.0, 0.0)],
        }
    }

    pub fn by_kind(kind: ToyKind, rho: f64, mass: crate::measure::MassProfile) -> Self {
        match kind {
            ToyKind::Dirac => Self::dirac(rho, mass),
            ToyKind::Quadratic => Self::quadratic_symmetric(rho),
            ToyKind::QuadraticDirac => Self::quadratic_dirac(rho),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::MassProfile;

    fn one(_: f64, _: f64) -> f64 {
        1.0
    }
    fn zero(_: f64, _: f64) -> f64 {
        0.0
    }

    #[test]
    fn dirac_field_values() {
        assert_eq!(dirac_gan_field(0.0, 0.0, 3.0, one, zero), (0.0, 0.0));
        assert_eq!(dirac_gan_field(1.0, 0.0, 1.0, one, zero), (-1.0, 1.0));
        let m = |p: f64, _: f64| p * p;
        let dm = |p: f64, _: f64| 2.0 * p;
        assert_eq!(dirac_gan_field(1.0, 0.0, 1.0, m, dm), (-2.0, 1.0));
    }

    #[test]
    fn lyapunov_values() {
        assert_eq!(dirac_gan_lyapunov(0.0, 5.0, 1.0, one, zero), (25.0, 0.0));
        assert_eq!(dirac_gan_lyapunov(1.0, 1.0, 1.0, one, zero), (2.0, -2.0));
        assert_eq!(dirac_gan_lyapunov(0.7, -0.3, 0.0, one, zero).1, 0.0);
    }

    #[test]
    fn lyapunov_derivative_is_gradient_dot_field() {
        let m = |p: f64, t: f64| (1.0 - (p * p + t * t) / 4.0).max(0.0);
        let dm = |p: f64, t: f64| if p * p + t * t < 4.0 { -p / 2.0 } else { 0.0 };
        for &(p, t) in &[(0.3, 0.4), (-1.0, 0.2), (1.2, -0.9)] {
            let (pd, td) = dirac_gan_field(p, t, 0.8, m, dm);
            let (_, ldot) = dirac_gan_lyapunov(p, t, 0.8, m, dm);
            assert!((ldot - 2.0 * (p * pd + t * td)).abs() < 1e-12);
        }
    }

    #[test]
    fn basin_constant_mass_is_global() {
        assert_eq!(basin_radius(one, zero, 5.0, BASIN_TOL).unwrap(), BasinRadius::Infinite);
    }

    #[test]
    fn basin_psi_squared_mass_is_global() {
        let m = |p: f64, _: f64| p * p;
        let dm = |p: f64, _: f64| 2.0 * p;
        assert_eq!(basin_radius(m, dm, 3.0, BASIN_TOL).unwrap(), BasinRadius::Infinite);
    }

    #[test]
    fn basin_rejects_negative_mass() {
        let m = |p: f64, _: f64| p;
        assert!(matches!(basin_radius(m, zero, 1.0, 1e-2), Err(Error::InvalidMeasure { .. })));
    }

    #[test]
    fn quadratic_field_values() {
        assert_eq!(quadratic_gan_field(0.0, 1.0, 2.0, |_| 1.0 / 3.0), (0.0, 0.0));
        let (a, b) = quadratic_gan_field(1.0, 1.0, 1.0, |_| 1.0 / 3.0);
        assert!((a + 4.0 / 3.0).abs() < 1e-15 && (b - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(quadratic_gan_field(0.0, 0.0, 5.0, |_| 0.0), (1.0 / 3.0, 0.0));
    }

    #[test]
    fn quadratic_spectrum_values() {
        let (l1, l2) = quadratic_gan_spectrum(1.5, 1.0 / 3.0);
        let s5 = 5f64.sqrt() / 3.0;
        assert!((l1.re - (-1.0 + s5)).abs() < 1e-14 && l1.im == 0.0);
        assert!((l2.re - (-1.0 - s5)).abs() < 1e-14);
        let (l1, l2) = quadratic_gan_spectrum(1.0, 0.0);
        assert!(l1.re.abs() < 1e-15 && (l1.im.abs() - 2.0 / 3.0).abs() < 1e-15);
        assert!((l1.im + l2.im).abs() < 1e-15);
        let (l1, l2) = quadratic_gan_spectrum(1.0, 1.0);
        assert!((l1.re + 0.114_381_916_835_873_3).abs() < 1e-12, "{l1}");
        assert!((l2.re + 3.885_618_083_164_127).abs() < 1e-12, "{l2}");
    }

    #[test]
    fn quadratic_dirac_values() {
        for a in [-3.0, -0.5, 0.0, 2.0] {
            assert_eq!(quadratic_dirac_field(a, 0.0, 0.375), (0.0, 0.0));
        }
        assert_eq!(quadratic_dirac_field(0.0, 1.0, 0.375), (-1.0, 0.0));
        assert_eq!(quadratic_dirac_field(-2.0, 1.0, 0.375), (0.0, -4.0));
        assert_eq!(quadratic_dirac_nullclines(0.375), [0.0, -2.0]);
    }

    #[test]
    fn named_toys() {
        let toy = ToySystem2D::by_kind("dirac".parse().unwrap(), 1.0, MassProfile::Constant(1.0));
        assert_eq!(toy.eval(1.0, 0.0), (-1.0, 1.0));
        for &(p, t) in &ToySystem2D::quadratic_symmetric(1.0).equilibria {
            let (a, b) = ToySystem2D::quadratic_symmetric(1.0).eval(p, t);
            assert!(a.hypot(b) <= 1e-12);
        }
        assert!("bogus".parse::<ToyKind>().is_err());
    }
}
