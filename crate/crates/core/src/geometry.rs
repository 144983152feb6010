//! Model domains (unit disk, unit ball of `C^n`), boundary distance,
//! pseudohyperbolic and Kobayashi distances, and Kobayashi balls.
//!
//! The raw helpers operating on `&[Complex64]` are used in hot quadrature
//! loops; the [`Point`] type enforces admissibility for public entry points.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Largest admissible Euclidean norm: `|z| <= 1 - ADMISSIBLE_MARGIN`.
pub const ADMISSIBLE_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    UnitDisk,
    UnitBall,
}

/// The unit disk (`n = 1`) or the unit ball of `C^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDomain {
    kind: DomainKind,
    n: usize,
}

impl ModelDomain {
    pub fn disk() -> Self {
        ModelDomain {
            kind: DomainKind::UnitDisk,
            n: 1,
        }
    }

    pub fn ball(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(LabError::InvalidDomain("complex dimension must be >= 1".into()));
        }
        Ok(ModelDomain {
            kind: DomainKind::UnitBall,
            n,
        })
    }

    pub fn new(kind: DomainKind, n: usize) -> Result<Self> {
        match kind {
            DomainKind::UnitDisk if n != 1 => Err(LabError::InvalidDomain(format!(
                "the unit disk has n = 1, got n = {n}"
            ))),
            DomainKind::UnitDisk => Ok(Self::disk()),
            DomainKind::UnitBall => Self::ball(n),
        }
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    /// Complex dimension.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// `n + 1`, the exponent that appears in every volume and kernel estimate.
    pub fn weight_exponent(&self) -> f64 {
        (self.n + 1) as f64
    }

    /// Lebesgue volume `pi^n / n!` of the domain.
    pub fn volume(&self) -> f64 {
        PI.powi(self.n as i32) / factorial(self.n)
    }

    pub fn point(&self, coords: Vec<Complex64>) -> Result<Point> {
        if coords.len() != self.n {
            return Err(LabError::DimensionMismatch {
                expected: self.n,
                got: coords.len(),
            });
        }
        Point::new(coords)
    }

    /// Point on the real axis of the first coordinate, `(x, 0, ..., 0)`.
    pub fn point_on_axis(&self, x: f64) -> Result<Point> {
        let mut coords = vec![Complex64::new(0.0, 0.0); self.n];
        coords[0] = Complex64::new(x, 0.0);
        Point::new(coords)
    }

    pub fn origin(&self) -> Point {
        Point {
            coords: vec![Complex64::new(0.0, 0.0); self.n],
        }
    }

    /// First basis vector, used as default boundary direction.
    pub fn axis(&self) -> Vec<Complex64> {
        let mut e = vec![Complex64::new(0.0, 0.0); self.n];
        e[0] = Complex64::new(1.0, 0.0);
        e
    }

    pub fn check(&self, z: &Point) -> Result<()> {
        if z.dim() != self.n {
            return Err(LabError::DimensionMismatch {
                expected: self.n,
                got: z.dim(),
            });
        }
        Ok(())
    }

    pub fn boundary_distance(&self, z: &Point) -> Result<f64> {
        self.check(z)?;
        Ok(z.delta())
    }

    pub fn pseudohyperbolic_distance(&self, z: &Point, w: &Point) -> Result<f64> {
        self.check(z)?;
        self.check(w)?;
        Ok(pseudo_distance(z.coords(), w.coords()))
    }

    pub fn kobayashi_distance(&self, z: &Point, w: &Point) -> Result<f64> {
        Ok(self.pseudohyperbolic_distance(z, w)?.atanh())
    }

    /// Lebesgue volume of the Kobayashi ball `B(z0, r)`:
    /// `r^{2n} (pi^n/n!) ((1-|z0|^2)/(1-r^2|z0|^2))^{n+1}`.
    pub fn kobayashi_ball_volume(&self, z0: &Point, r: f64) -> Result<f64> {
        self.check(z0)?;
        check_radius(r)?;
        Ok(ball_volume_raw(self.n, z0.coords(), r))
    }
}

pub(crate) fn check_radius(r: f64) -> Result<()> {
    if !(r > 0.0 && r < 1.0) {
        return Err(LabError::param("r", format!("must lie in (0,1), got {r}")));
    }
    Ok(())
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// A point of the domain: `|z| <= 1 - 1e-12`, so `delta(z) > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    coords: Vec<Complex64>,
}

impl Point {
    pub fn new(coords: Vec<Complex64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(LabError::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        let norm = norm_sq(&coords).sqrt();
        if !norm.is_finite() || norm > 1.0 - ADMISSIBLE_MARGIN {
            return Err(LabError::InadmissiblePoint { norm });
        }
        Ok(Point { coords })
    }

    /// Disk point from a complex number.
    pub fn disk(z: Complex64) -> Result<Self> {
        Self::new(vec![z])
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm(&self) -> f64 {
        norm_sq(&self.coords).sqrt()
    }

    /// Euclidean distance to the boundary, `1 - |z|`.
    pub fn delta(&self) -> f64 {
        delta_raw(&self.coords)
    }

    /// Unit vector `z/|z|`, or the first axis at the origin.
    pub fn direction(&self) -> Vec<Complex64> {
        let r = self.norm();
        if r == 0.0 {
            let mut e = vec![Complex64::new(0.0, 0.0); self.dim()];
            e[0] = Complex64::new(1.0, 0.0);
            e
        } else {
            self.coords.iter().map(|c| c / r).collect()
        }
    }

}

impl std::fmt::Display for Point {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        format_coords(&self.coords, f)
    }
}

pub(crate) fn coords_string(c: &[Complex64]) -> String {
    struct W<'a>(&'a [Complex64]);
    impl std::fmt::Display for W<'_> {
        fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
            format_coords(self.0, f)
        }
    }
    W(c).to_string()
}

fn format_coords(c: &[Complex64], f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
    write!(f, "(")?;
    for (i, z) in c.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{}{:+}i", z.re, z.im)?;
    }
    write!(f, ")")
}

/// A Kobayashi ball: pseudohyperbolic radius `r`, Kobayashi radius
/// `atanh(r) = (1/2) log((1+r)/(1-r))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KobayashiBall {
    center: Point,
    r: f64,
}

impl KobayashiBall {
    pub fn new(center: Point, r: f64) -> Result<Self> {
        check_radius(r)?;
        Ok(KobayashiBall { center, r })
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    pub fn kobayashi_radius(&self) -> f64 {
        self.r.atanh()
    }

    /// Open ball: strict inequality `rho(center, z) < r`.
    pub fn contains(&self, z: &Point) -> bool {
        z.dim() == self.center.dim() && pseudo_distance(self.center.coords(), z.coords()) < self.r
    }

    pub fn volume(&self) -> f64 {
        ball_volume_raw(self.center.dim(), self.center.coords(), self.r)
    }
}

/// Euclidean image of a disk Kobayashi ball: `(center, radius)`.
pub fn disk_ball_euclidean(a: Complex64, r: f64) -> (Complex64, f64) {
    let a2 = a.norm_sqr();
    let den = 1.0 - r * r * a2;
    (a * ((1.0 - r * r) / den), r * (1.0 - a2) / den)
}

// ---- raw helpers -------------------------------------------------------

#[inline]
pub fn norm_sq(z: &[Complex64]) -> f64 {
    z.iter().map(|c| c.norm_sqr()).sum()
}

/// Hermitian product `<z, w> = sum z_k conj(w_k)`.
#[inline]
pub fn inner(z: &[Complex64], w: &[Complex64]) -> Complex64 {
    z.iter().zip(w).map(|(a, b)| a * b.conj()).sum()
}

/// `1 - |z|`, computed as `(1-|z|^2)/(1+|z|)`.
#[inline]
pub fn delta_raw(z: &[Complex64]) -> f64 {
    let s = norm_sq(z);
    (1.0 - s) / (1.0 + s.sqrt())
}

/// Pseudohyperbolic distance `|phi_a(b)|`, via
/// `rho^2 = (|a-b|^2 - sum_{j<k} |a_j b_k - a_k b_j|^2) / |1 - <a,b>|^2`,
/// which is exactly symmetric in floating point and exact at `a = b`.
pub fn pseudo_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let mut lagrange = 0.0;
    for j in 0..a.len() {
        for k in (j + 1)..a.len() {
            lagrange += (a[j] * b[k] - a[k] * b[j]).norm_sqr();
        }
    }
    let den = (Complex64::new(1.0, 0.0) - inner(a, b)).norm_sqr();
    ((diff - lagrange).max(0.0) / den).sqrt().min(1.0)
}

/// `1 - |phi_a(u)|^2 = (1-|a|^2)(1-|u|^2)/|1 - <u,a>|^2`.
#[inline]
pub fn one_minus_phi_sq(a: &[Complex64], u: &[Complex64]) -> f64 {
    let d = (Complex64::new(1.0, 0.0) - inner(u, a)).norm_sqr();
    (1.0 - norm_sq(a)) * (1.0 - norm_sq(u)) / d
}

/// The involutive automorphism `phi_a` of the ball with `phi_a(0) = a`,
/// `phi_a(a) = 0`:
/// `phi_a(z) = (a - P_a z - s_a Q_a z) / (1 - <z,a>)`, `s_a = sqrt(1-|a|^2)`.
pub fn automorphism(a: &[Complex64], z: &[Complex64]) -> Vec<Complex64> {
    let a2 = norm_sq(a);
    if a2 == 0.0 {
        return z.iter().map(|c| -c).collect();
    }
    let za = inner(z, a);
    let sa = (1.0 - a2).sqrt();
    let den = Complex64::new(1.0, 0.0) - za;
    a.iter()
        .zip(z)
        .map(|(ak, zk)| {
            let p = ak * (za / a2);
            let q = zk - p;
            (ak - p - q * sa) / den
        })
        .collect()
}

/// Real Jacobian of `phi_a` at `u`: `((1-|a|^2)/|1-<u,a>|^2)^{n+1}`.
#[inline]
pub fn automorphism_jacobian(a: &[Complex64], u: &[Complex64]) -> f64 {
    let d = (Complex64::new(1.0, 0.0) - inner(u, a)).norm_sqr();
    ((1.0 - norm_sq(a)) / d).powi(a.len() as i32 + 1)
}

pub fn ball_volume_raw(n: usize, a: &[Complex64], r: f64) -> f64 {
    let a2 = norm_sq(a);
    let vol = PI.powi(n as i32) / factorial(n);
    r.powi(2 * n as i32) * vol * ((1.0 - a2) / (1.0 - r * r * a2)).powi(n as i32 + 1)
}
