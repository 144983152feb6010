//! Finite positive measures on the domain: densities `delta^eta g dnu`,
//! finite sums of point masses and mixtures of these. Kobayashi-ball
//! masses, theta-Carleson profiles over r-lattices, Berezin transforms and
//! uniformly discrete sequences.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{fit_power_law, PowerFit, Thresholds};
use crate::error::{LabError, Result};
use crate::geometry::{
    automorphism_jacobian, ball_volume_raw, check_radius, factorial, inner, norm_sq, one_minus_phi_sq,
    pseudo_distance, ModelDomain, Point,
};
use crate::kernel::{kernel_constant, offset_map};
use crate::lattice::{sphere_net, CenterIndex, RLattice};
use crate::quadrature::{check_path, gauss_legendre, integrate, IntegrationResult, QuadratureRule};

/// Atoms closer than this to the boundary are rejected.
pub const MIN_ATOM_DELTA: f64 = 1e-10;

/// A point mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub point: Point,
    pub mass: f64,
}

/// JSON form `[re_1, im_1, ..., re_n, im_n, mass]`.
mod atom_serde {
    use super::*;
    use serde::{de::Error, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(atoms: &[Atom], s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = atoms
            .iter()
            .map(|a| {
                let mut v: Vec<f64> = a.point.coords().iter().flat_map(|c| [c.re, c.im]).collect();
                v.push(a.mass);
                v
            })
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Atom>, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        rows.into_iter()
            .map(|row| {
                if row.len() < 3 || row.len() % 2 == 0 {
                    return Err(D::Error::custom("atom rows are [re, im, ..., mass]"));
                }
                let mass = row[row.len() - 1];
                let coords = row[..row.len() - 1]
                    .chunks(2)
                    .map(|c| Complex64::new(c[0], c[1]))
                    .collect();
                let point = Point::new(coords).map_err(D::Error::custom)?;
                Ok(Atom { point, mass })
            })
            .collect()
    }
}

fn default_g() -> Vec<f64> {
    vec![1.0]
}

/// `density`: `delta^eta g(|z|^2) dnu` with `g(t) = sum g_k t^k` positive on
/// `[0, 1]`; `atomic`: `sum m_j delta_{z_j}`; `mixture`: the sum of members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum Measure {
    Density {
        eta: f64,
        #[serde(default = "default_g")]
        g: Vec<f64>,
    },
    Atomic {
        #[serde(with = "atom_serde")]
        atoms: Vec<Atom>,
    },
    Mixture {
        members: Vec<Measure>,
    },
}

pub(crate) fn eval_g(g: &[f64], t: f64) -> f64 {
    g.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

impl Measure {
    /// Volume measure `nu`.
    pub fn volume() -> Self {
        Measure::Density { eta: 0.0, g: default_g() }
    }

    pub fn density(eta: f64) -> Result<Self> {
        let m = Measure::Density { eta, g: default_g() };
        m.validate()?;
        Ok(m)
    }

    pub fn density_with_factor(eta: f64, g: Vec<f64>) -> Result<Self> {
        let m = Measure::Density { eta, g };
        m.validate()?;
        Ok(m)
    }

    pub fn atomic(atoms: Vec<(Point, f64)>) -> Result<Self> {
        let m = Measure::Atomic {
            atoms: atoms.into_iter().map(|(point, mass)| Atom { point, mass }).collect(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn mixture(members: Vec<Measure>) -> Result<Self> {
        let m = Measure::Mixture { members };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Measure::Density { eta, g } => {
                if !(*eta > -1.0 && eta.is_finite()) {
                    return Err(LabError::InvalidMeasure(format!(
                        "density exponent must be > -1, got {eta}"
                    )));
                }
                if g.is_empty() || g.iter().any(|c| !c.is_finite()) {
                    return Err(LabError::InvalidMeasure("factor g needs finite coefficients".into()));
                }
                if (0..=1000).any(|i| eval_g(g, i as f64 / 1000.0) <= 0.0) {
                    return Err(LabError::InvalidMeasure("factor g must be positive on [0, 1]".into()));
                }
            }
            Measure::Atomic { atoms } => {
                let n = atoms.first().map(|a| a.point.dim());
                for a in atoms {
                    if Some(a.point.dim()) != n {
                        return Err(LabError::InvalidMeasure("atoms of mixed dimension".into()));
                    }
                    if !(a.mass > 0.0 && a.mass.is_finite()) {
                        return Err(LabError::InvalidMeasure(format!("atom mass must be > 0, got {}", a.mass)));
                    }
                    if a.point.delta() < MIN_ATOM_DELTA {
                        return Err(LabError::InvalidMeasure(format!(
                            "atom at delta = {:e} < {MIN_ATOM_DELTA:e}",
                            a.point.delta()
                        )));
                    }
                }
            }
            Measure::Mixture { members } => {
                for m in members {
                    m.validate()?;
                }
            }
        }
        Ok(())
    }

    /// The measure dimension must match, and atoms of other dimensions are an error.
    pub fn check_domain(&self, domain: &ModelDomain) -> Result<()> {
        match self {
            Measure::Density { .. } => Ok(()),
            Measure::Atomic { atoms } => atoms.iter().try_for_each(|a| domain.check(&a.point)),
            Measure::Mixture { members } => members.iter().try_for_each(|m| m.check_domain(domain)),
        }
    }

    pub fn has_atoms(&self) -> bool {
        match self {
            Measure::Density { .. } => false,
            Measure::Atomic { atoms } => !atoms.is_empty(),
            Measure::Mixture { members } => members.iter().any(|m| m.has_atoms()),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| LabError::Io(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Measure = serde_json::from_str(s).map_err(|e| LabError::InvalidMeasure(format!("json: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    /// Density members as `(eta, g)` plus atoms, flattened.
    pub(crate) fn parts(&self) -> (Vec<(f64, &[f64])>, Vec<&Atom>) {
        let mut dens = Vec::new();
        let mut atoms = Vec::new();
        fn walk<'a>(m: &'a Measure, dens: &mut Vec<(f64, &'a [f64])>, atoms: &mut Vec<&'a Atom>) {
            match m {
                Measure::Density { eta, g } => dens.push((*eta, g.as_slice())),
                Measure::Atomic { atoms: a } => atoms.extend(a.iter()),
                Measure::Mixture { members } => members.iter().for_each(|m| walk(m, dens, atoms)),
            }
        }
        walk(self, &mut dens, &mut atoms);
        (dens, atoms)
    }

    /// Total density `sum delta^eta g(|z|^2)` at a point with boundary
    /// distance `delta`.
    pub fn density_at(&self, delta: f64) -> f64 {
        let (dens, _) = self.parts();
        density_sum(&dens, delta)
    }
}

pub(crate) fn density_sum(dens: &[(f64, &[f64])], delta: f64) -> f64 {
    let t = (1.0 - delta) * (1.0 - delta);
    dens.iter()
        .map(|(eta, g)| {
            let w = if *eta == 0.0 { 1.0 } else { delta.powf(*eta) };
            w * eval_g(g, t)
        })
        .sum()
}

fn delta_from_one_minus_sq(s: f64) -> f64 {
    s / (1.0 + (1.0 - s).max(0.0).sqrt())
}

/// Tensor rule on the Euclidean ball of radius `r` for integrands depending
/// on `|u|` and `<u, e>` only (`e` a unit vector): on the disk a polar
/// product rule, on the ball the reduction
/// `int_B F = pi^{n-1}/(n-2)! int_disk (1-|w|^2)^{n-1} int_0^1 F(w e + sqrt((1-|w|^2) tau) e_perp) tau^{n-2} dtau dA(w)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BallRule {
    pub radial: usize,
    pub angular: usize,
}

impl Default for BallRule {
    fn default() -> Self {
        BallRule { radial: 12, angular: 48 }
    }
}

impl BallRule {
    /// `(points u, weights)` for the ball of radius `r` around `0`, built
    /// around the unit direction `e`.
    fn nodes(&self, n: usize, e: &[Complex64], r: f64) -> (Vec<Vec<Complex64>>, Vec<f64>) {
        let (x, w) = gauss_legendre(self.radial);
        let radial: Vec<(f64, f64)> = x.iter().zip(&w).map(|(a, b)| (0.5 * (a + 1.0), 0.5 * b)).collect();
        let na = self.angular;
        let dphi = 2.0 * PI / na as f64;
        let perp = if n > 1 { orthogonal_unit(e) } else { Vec::new() };
        let scale = r.powi(2 * n as i32);
        let c_n = if n > 1 { PI.powi(n as i32 - 1) / factorial(n - 2) } else { 1.0 };
        let mut pts = Vec::new();
        let mut wts = Vec::new();
        for &(rho, wr) in &radial {
            for j in 0..na {
                let wdisk = Complex64::from_polar(rho, j as f64 * dphi);
                let base = wr * rho * dphi;
                if n == 1 {
                    pts.push(vec![e[0] * wdisk * r]);
                    wts.push(base * scale);
                    continue;
                }
                let s1 = 1.0 - rho * rho;
                for &(tau, wt) in &radial {
                    let rad = (s1 * tau).sqrt();
                    let u: Vec<Complex64> = e.iter().zip(&perp).map(|(a, b)| (a * wdisk + b * rad) * r).collect();
                    pts.push(u);
                    wts.push(base * c_n * s1.powi(n as i32 - 1) * wt * tau.powi(n as i32 - 2) * scale);
                }
            }
        }
        (pts, wts)
    }
}

fn orthogonal_unit(xi: &[Complex64]) -> Vec<Complex64> {
    let n = xi.len();
    let k = (0..n)
        .min_by(|&a, &b| xi[a].norm().total_cmp(&xi[b].norm()))
        .unwrap_or(0);
    let mut e = vec![Complex64::new(0.0, 0.0); n];
    e[k] = Complex64::new(1.0, 0.0);
    let proj = inner(&e, xi);
    let mut v: Vec<Complex64> = e.iter().zip(xi).map(|(a, b)| a - b * proj).collect();
    let nrm = norm_sq(&v).sqrt();
    v.iter_mut().for_each(|c| *c /= nrm);
    v
}

/// Densities: `mu(B(a, r)) = int_{|u|<r} rho(phi_a(u)) J_a(u) dV(u)`, the
/// pullback through the automorphism exchanging `0` and `a`, with
/// `1 - |phi_a(u)|^2 = (1-|a|^2)(1-|u|^2)/|1-<u,a>|^2`.
fn density_ball_mass(dens: &[(f64, &[f64])], a: &[Complex64], r: f64, rule: &BallRule) -> f64 {
    if dens.is_empty() {
        return 0.0;
    }
    let n = a.len();
    let na = norm_sq(a).sqrt();
    let e: Vec<Complex64> = if na > 0.0 {
        a.iter().map(|c| c / na).collect()
    } else {
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        e[0] = Complex64::new(1.0, 0.0);
        e
    };
    let (pts, wts) = rule.nodes(n, &e, r);
    pts.iter()
        .zip(&wts)
        .map(|(u, w)| {
            let d = delta_from_one_minus_sq(one_minus_phi_sq(a, u));
            w * automorphism_jacobian(a, u) * density_sum(dens, d)
        })
        .sum()
}

/// `mu(B(z0, r))`.
pub fn ball_mass(mu: &Measure, domain: &ModelDomain, z0: &Point, r: f64) -> Result<f64> {
    ball_mass_with(mu, domain, z0, r, &BallRule::default())
}

pub fn ball_mass_with(mu: &Measure, domain: &ModelDomain, z0: &Point, r: f64, rule: &BallRule) -> Result<f64> {
    domain.check(z0)?;
    check_radius(r)?;
    mu.check_domain(domain)?;
    let (dens, atoms) = mu.parts();
    let a = z0.coords();
    let atomic: f64 = atoms
        .iter()
        .filter(|at| pseudo_distance(a, at.point.coords()) < r)
        .map(|at| at.mass)
        .sum();
    Ok(density_ball_mass(&dens, a, r, rule) + atomic)
}

/// Ratios `mu(B(a_k, r)) / nu(B(a_k, r))^theta` at lattice centres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarlesonProfile {
    pub theta: f64,
    pub r: f64,
    pub delta_min: f64,
    /// `(delta(a_k), ratio)`, decreasing `delta`.
    pub samples: Vec<(f64, f64)>,
    pub sup_ratio: f64,
    /// Slope of `log ratio` against `log delta` over the positive ratios.
    pub decay_trend: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecadeStatistic {
    Median,
    Max,
}

/// Per-decade summary: decade `k` holds `10^{-k-1} < delta <= 10^{-k}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decade {
    pub k: i32,
    pub count: usize,
    pub median: f64,
    pub max: f64,
}

impl CarlesonProfile {
    pub fn decades(&self) -> Vec<Decade> {
        let mut out: Vec<Decade> = Vec::new();
        let mut bucket: Vec<f64> = Vec::new();
        let mut current: Option<i32> = None;
        let flush = |k: i32, b: &mut Vec<f64>, out: &mut Vec<Decade>| {
            if b.is_empty() {
                return;
            }
            b.sort_by(f64::total_cmp);
            let m = b.len();
            let median = if m % 2 == 1 { b[m / 2] } else { 0.5 * (b[m / 2 - 1] + b[m / 2]) };
            out.push(Decade {
                k,
                count: m,
                median,
                max: b[m - 1],
            });
            b.clear();
        };
        for &(d, v) in &self.samples {
            let k = decade_of(d);
            if current != Some(k) {
                if let Some(c) = current {
                    flush(c, &mut bucket, &mut out);
                }
                current = Some(k);
            }
            bucket.push(v);
        }
        if let Some(c) = current {
            flush(c, &mut bucket, &mut out);
        }
        out
    }

    /// Vanishing iff the statistic is non-increasing over the last two
    /// decade steps and the final decade is at most `0.1` of the first.
    pub fn vanishing_verdict(&self, stat: DecadeStatistic) -> VanishingVerdict {
        let dec = self.decades();
        if dec.len() < 3 {
            return VanishingVerdict::Inconclusive;
        }
        let val = |d: &Decade| match stat {
            DecadeStatistic::Median => d.median,
            DecadeStatistic::Max => d.max,
        };
        let m = dec.len();
        let tail_down = val(&dec[m - 2]) <= val(&dec[m - 3]) && val(&dec[m - 1]) <= val(&dec[m - 2]);
        if tail_down && val(&dec[m - 1]) <= 0.1 * val(&dec[0]) {
            VanishingVerdict::Vanishing
        } else {
            VanishingVerdict::NonVanishing
        }
    }

    /// Bounded iff the decade maxima neither trend upward toward the boundary
    /// (log-log slope `> -deadband`) nor leave the band set by the first
    /// decade.
    pub fn carleson_verdict(&self, t: &Thresholds) -> CarlesonVerdict {
        let dec = self.decades();
        if dec.len() < 3 {
            return CarlesonVerdict::Inconclusive;
        }
        let pts: Vec<(f64, f64)> = dec
            .iter()
            .filter(|d| d.max > 0.0)
            .map(|d| (-(d.k as f64 + 0.5) * std::f64::consts::LN_10, d.max.ln()))
            .collect();
        let slope = if pts.len() >= 2 { line_slope(&pts) } else { 0.0 };
        let first = dec[0].max;
        let worst = dec.iter().map(|d| d.max).fold(0.0, f64::max);
        if slope > -t.slope_deadband && worst <= t.bounded_band * first.max(f64::MIN_POSITIVE) {
            CarlesonVerdict::Bounded
        } else {
            CarlesonVerdict::Unbounded
        }
    }

    /// `max/min` of the ratios with `delta` in `[lo, hi]`.
    pub fn band(&self, lo: f64, hi: f64) -> f64 {
        let vals: Vec<f64> = self
            .samples
            .iter()
            .filter(|s| s.0 >= lo && s.0 <= hi)
            .map(|s| s.1)
            .collect();
        let max = vals.iter().cloned().fold(f64::MIN, f64::max);
        let min = vals.iter().cloned().fold(f64::MAX, f64::min);
        max / min
    }
}

fn decade_of(d: f64) -> i32 {
    // delta = 10^{-k} belongs to decade k
    let k = (-d.log10()).floor() as i32;
    if 10f64.powi(-k) < d * (1.0 - 1e-12) {
        k - 1
    } else {
        k.max(0)
    }
}

fn line_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VanishingVerdict {
    Vanishing,
    NonVanishing,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CarlesonVerdict {
    Bounded,
    Unbounded,
    Inconclusive,
}

pub fn carleson_profile(mu: &Measure, domain: &ModelDomain, lattice: &RLattice, theta: f64) -> Result<CarlesonProfile> {
    carleson_profile_with(mu, domain, lattice, theta, &BallRule::default())
}

pub fn carleson_profile_with(
    mu: &Measure,
    domain: &ModelDomain,
    lattice: &RLattice,
    theta: f64,
    rule: &BallRule,
) -> Result<CarlesonProfile> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(LabError::param("theta", format!("must be > 0, got {theta}")));
    }
    if lattice.domain != *domain {
        return Err(LabError::InvalidDomain("lattice built for another domain".into()));
    }
    mu.check_domain(domain)?;
    let r = lattice.r;
    let (dens, atoms) = mu.parts();
    let n = domain.dim();
    // atoms bucketed for range queries
    let mut atom_index = CenterIndex::new(n);
    let masses: Vec<f64> = atoms.iter().map(|a| a.mass).collect();
    for a in &atoms {
        atom_index.insert(a.point.coords().to_vec());
    }
    let mut samples: Vec<(f64, f64)> = lattice
        .centers
        .par_iter()
        .map(|c| {
            let a = c.coords();
            let mut m = density_ball_mass(&dens, a, r, rule);
            atom_index.for_each_within(a, r, |id, _| {
                m += masses[id];
                true
            });
            let vol = ball_volume_raw(n, a, r);
            (c.delta(), m / vol.powf(theta))
        })
        .collect();
    samples.sort_by(|x, y| y.0.total_cmp(&x.0));
    let sup_ratio = samples.iter().map(|s| s.1).fold(0.0, f64::max);
    let positive: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.1 > 0.0)
        .map(|s| (s.0.ln(), s.1.ln()))
        .collect();
    let decay_trend = if positive.len() >= 2 { line_slope(&positive) } else { 0.0 };
    Ok(CarlesonProfile {
        theta,
        r,
        delta_min: lattice.delta_min,
        samples,
        sup_ratio,
        decay_trend,
    })
}

/// Vanishing verdict by the decade rule on medians, or on maxima when the
/// measure has atoms (lattice balls missing every atom have ratio 0, so the
/// median does not see the supremum).
pub fn vanishing_profile(
    mu: &Measure,
    domain: &ModelDomain,
    lattice: &RLattice,
    theta: f64,
) -> Result<(VanishingVerdict, CarlesonProfile)> {
    let prof = carleson_profile(mu, domain, lattice, theta)?;
    let stat = if mu.has_atoms() { DecadeStatistic::Max } else { DecadeStatistic::Median };
    Ok((prof.vanishing_verdict(stat), prof))
}

/// `B mu(z) = int |k_z|^2 dmu`.
pub fn berezin_transform(mu: &Measure, domain: &ModelDomain, z: &Point, rule: &QuadratureRule) -> Result<f64> {
    Ok(berezin_transform_detailed(mu, domain, z, rule)?.value)
}

pub fn berezin_transform_detailed(
    mu: &Measure,
    domain: &ModelDomain,
    z: &Point,
    rule: &QuadratureRule,
) -> Result<IntegrationResult<f64>> {
    domain.check(z)?;
    mu.check_domain(domain)?;
    let n = domain.dim();
    let (dens, atoms) = mu.parts();
    let zc = z.coords();
    let d = z.delta();
    // |k_z(w)|^2 = c_n (s / |1 - <w, z>|^2)^{n+1}, s = 1 - |z|^2
    let s = d * (2.0 - d);
    let cn = kernel_constant(n);
    let np1 = n as i32 + 1;
    let atomic: f64 = atoms
        .iter()
        .map(|a| {
            let c = Complex64::new(1.0, 0.0) - inner(a.point.coords(), zc);
            a.mass * cn * (s / c.norm_sqr()).powi(np1)
        })
        .sum();
    if dens.is_empty() {
        return Ok(IntegrationResult {
            value: atomic,
            error_estimate: 0.0,
            nodes_used: atoms.len(),
        });
    }
    let r = rule.focused_near(z);
    let off = offset_map(&r, zc);
    let mut res = integrate(
        domain,
        |node| cn * (s / off(&node).norm_sqr()).powi(np1) * density_sum(&dens, node.delta),
        &r,
    )?;
    res.value += atomic;
    Ok(res)
}

/// Berezin transform along `path` and its log-log fit.
pub fn berezin_exponent_profile(
    mu: &Measure,
    domain: &ModelDomain,
    path: &[Point],
    rule: &QuadratureRule,
) -> Result<(PowerFit, Vec<(f64, f64)>)> {
    check_path(path)?;
    let samples: Vec<(f64, f64)> = path
        .par_iter()
        .map(|z| berezin_transform(mu, domain, z, rule).map(|b| (z.delta(), b)))
        .collect::<Result<_>>()?;
    Ok((fit_power_law(&samples)?, samples))
}

/// `delta^eta mu`.
pub fn shift_measure(mu: &Measure, eta: f64) -> Result<Measure> {
    let out = match mu {
        Measure::Density { eta: e0, g } => {
            let e = e0 + eta;
            if !(e > -1.0) {
                return Err(LabError::InvalidMeasure(format!(
                    "shifted density exponent {e} is not integrable"
                )));
            }
            Measure::Density { eta: e, g: g.clone() }
        }
        Measure::Atomic { atoms } => Measure::Atomic {
            atoms: atoms
                .iter()
                .map(|a| Atom {
                    point: a.point.clone(),
                    mass: a.mass * a.point.delta().powf(eta),
                })
                .collect(),
        },
        Measure::Mixture { members } => Measure::Mixture {
            members: members.iter().map(|m| shift_measure(m, eta)).collect::<Result<_>>()?,
        },
    };
    out.validate()?;
    Ok(out)
}

/// Points pairwise at Kobayashi distance `>= separation`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceFamily {
    points: Vec<Point>,
    separation: f64,
}

impl SequenceFamily {
    /// Validates the separation claim.
    pub fn new(points: Vec<Point>, separation: f64) -> Result<Self> {
        if !(separation > 0.0 && separation.is_finite()) {
            return Err(LabError::param("separation", "must be > 0"));
        }
        if let Some(n) = points.first().map(|p| p.dim()) {
            if points.iter().any(|p| p.dim() != n) {
                return Err(LabError::param("points", "mixed dimensions"));
            }
            let got = min_kobayashi_separation(&points, separation);
            if got < separation {
                return Err(LabError::param(
                    "separation",
                    format!("points are only {got} apart, claimed {separation}"),
                ));
            }
        }
        Ok(SequenceFamily { points, separation })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn separation(&self) -> f64 {
        self.separation
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Smallest pairwise Kobayashi distance, capped at `cap`.
pub fn min_kobayashi_separation(points: &[Point], cap: f64) -> f64 {
    let n = match points.first() {
        Some(p) => p.dim(),
        None => return cap,
    };
    let mut idx = CenterIndex::new(n);
    for p in points {
        idx.insert(p.coords().to_vec());
    }
    let rho = cap.tanh();
    (0..points.len())
        .into_par_iter()
        .map(|i| {
            let mut best = cap;
            idx.for_each_within(points[i].coords(), rho, |j, d| {
                if j != i {
                    best = best.min(d.atanh());
                }
                true
            });
            best
        })
        .reduce(|| cap, f64::min)
}

/// Largest `N` with consecutive points of `rho e^{2 pi i j/N}` at Kobayashi
/// distance `>= eps`.
fn shell_count(rho: f64, eps: f64) -> usize {
    let target = eps.tanh();
    let dist = |alpha: f64| {
        let a = [Complex64::new(rho, 0.0)];
        let b = [Complex64::from_polar(rho, alpha)];
        pseudo_distance(&a, &b)
    };
    if dist(PI) < target {
        return 1;
    }
    // smallest angle reaching the target
    let (mut lo, mut hi) = (0.0, PI);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dist(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    ((2.0 * PI / hi) * (1.0 - 1e-12)).floor().max(1.0) as usize
}

/// Hyperbolic shells at Kobayashi radii `j eps` (`j = 0, 1, ...`) while
/// `delta >= delta_min`. The disk shells are equispaced at the densest
/// spacing keeping neighbours `eps` apart; ball shells take a greedy subset
/// of a sphere net. Shell sizes grow by about `e^{2 eps}` per shell.
pub fn generate_uniformly_discrete(domain: &ModelDomain, eps: f64, delta_min: f64) -> Result<SequenceFamily> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(LabError::param("eps", "must be > 0"));
    }
    if !(delta_min >= 1e-4 && delta_min < 1.0) {
        return Err(LabError::param("delta_min", "must lie in [1e-4, 1)"));
    }
    let n = domain.dim();
    let mut pts: Vec<Point> = Vec::new();
    let mut index = CenterIndex::new(n);
    let rho_eps = eps.tanh();
    for j in 0.. {
        let s = j as f64 * eps;
        let rho = s.tanh();
        if 1.0 - rho < delta_min {
            break;
        }
        if j == 0 {
            pts.push(domain.origin());
            index.insert(domain.origin().coords().to_vec());
            continue;
        }
        if n == 1 {
            let count = shell_count(rho, eps);
            for k in 0..count {
                pts.push(Point::disk(Complex64::from_polar(rho, 2.0 * PI * k as f64 / count as f64))?);
            }
        } else {
            let w = 1.0 - rho * rho;
            let h = 0.5 * eps;
            for u in sphere_net(n, h * w / rho, h * w.sqrt() / rho) {
                let z: Vec<Complex64> = u.into_iter().map(|c| c * rho).collect();
                if !index.any_within(&z, rho_eps) {
                    index.insert(z.clone());
                    pts.push(Point::new(z)?);
                }
            }
        }
    }
    SequenceFamily::new(pts, eps * (1.0 - 1e-9))
}

/// `#{x_j : rho(x_j, z0) < r}`.
pub fn counting_function(seq: &SequenceFamily, z0: &Point, r: f64) -> Result<usize> {
    check_radius(r)?;
    Ok(seq
        .points
        .iter()
        .filter(|p| p.dim() == z0.dim() && pseudo_distance(p.coords(), z0.coords()) < r)
        .count())
}

/// `sum_j delta(z_j)^{(n+1) theta} delta_{z_j}`.
pub fn discrete_theta_measure(seq: &SequenceFamily, theta: f64) -> Result<Measure> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(LabError::param("theta", "must be > 0"));
    }
    let atoms = seq
        .points
        .iter()
        .map(|p| {
            let e = (p.dim() + 1) as f64 * theta;
            (p.clone(), p.delta().powf(e))
        })
        .collect();
    Measure::atomic(atoms)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn ball_mass_examples() {
        let d = ModelDomain::disk();
        let o = d.origin();
        let v = ball_mass(&Measure::volume(), &d, &o, 0.5).unwrap();
        assert!((v - PI / 4.0).abs() < 1e-12, "{v}");
        let v = ball_mass(&Measure::density(1.0).unwrap(), &d, &o, 0.5).unwrap();
        assert!((v - PI / 6.0).abs() < 1e-10, "{v}");
        let atom = Measure::atomic(vec![(Point::disk(c(0.3, 0.0)).unwrap(), 2.5)]).unwrap();
        assert_eq!(ball_mass(&atom, &d, &o, 0.5).unwrap(), 2.5);
    }

    #[test]
    fn volume_mass_matches_closed_form() {
        for dom in [ModelDomain::disk(), ModelDomain::ball(2).unwrap(), ModelDomain::ball(3).unwrap()] {
            for x in [0.0, 0.5, 0.9, 0.999, 0.9999] {
                let z = dom.point_on_axis(x).unwrap();
                let got = ball_mass(&Measure::volume(), &dom, &z, 0.5).unwrap();
                let exact = dom.kobayashi_ball_volume(&z, 0.5).unwrap();
                assert!((got - exact).abs() < 1e-10 * exact, "n={} x={x}: {got} {exact}", dom.dim());
            }
        }
    }

    #[test]
    fn density_mass_agrees_with_quadrature() {
        // delta^eta over B(a, r) against the boundary-refined rule with the
        // ball indicator
        let d = ModelDomain::disk();
        let a = Point::disk(c(0.6, 0.3)).unwrap();
        let mu = Measure::density_with_factor(1.5, vec![1.0, 0.5]).unwrap();
        let got = ball_mass(&mu, &d, &a, 0.5).unwrap();
        let rule = QuadratureRule::monte_carlo(2_000_000, 5);
        let mc = integrate(
            &d,
            |node| {
                if pseudo_distance(node.z, a.coords()) < 0.5 {
                    mu.density_at(node.delta)
                } else {
                    0.0
                }
            },
            &rule,
        )
        .unwrap();
        assert!((got - mc.value).abs() < 4.0 * mc.error_estimate, "{got} {} {}", mc.value, mc.error_estimate);
    }

    #[test]
    fn atomic_mass_is_additive() {
        let d = ModelDomain::disk();
        let atoms: Vec<(Point, f64)> = (0..40)
            .map(|k| (Point::disk(Complex64::from_polar(0.05 + 0.02 * k as f64, k as f64)).unwrap(), 1.0 + k as f64))
            .collect();
        let mu = Measure::atomic(atoms).unwrap();
        let a = Point::disk(c(0.4, 0.0)).unwrap();
        let b = Point::disk(c(-0.4, 0.0)).unwrap();
        // B(a,0.3) and B(b,0.3) are disjoint
        assert!(pseudo_distance(a.coords(), b.coords()) > 0.6);
        let u = ball_mass(&mu, &d, &a, 0.3).unwrap() + ball_mass(&mu, &d, &b, 0.3).unwrap();
        let both: f64 = match &mu {
            Measure::Atomic { atoms } => atoms
                .iter()
                .filter(|t| {
                    pseudo_distance(t.point.coords(), a.coords()) < 0.3
                        || pseudo_distance(t.point.coords(), b.coords()) < 0.3
                })
                .map(|t| t.mass)
                .sum(),
            _ => unreachable!(),
        };
        assert_eq!(u, both);
    }

    #[test]
    fn validation() {
        assert!(Measure::density(-1.0).is_err());
        assert!(Measure::density_with_factor(0.0, vec![1.0, -2.0]).is_err());
        assert!(Measure::atomic(vec![(Point::disk(c(0.1, 0.0)).unwrap(), 0.0)]).is_err());
        let close = Point::disk(c(1.0 - 1e-11, 0.0)).unwrap();
        assert!(Measure::atomic(vec![(close, 1.0)]).is_err());
        assert!(shift_measure(&Measure::density(0.5).unwrap(), -2.0).is_err());
    }

    #[test]
    fn json_forms() {
        let m = Measure::from_json(r#"{"variant": "density", "eta": 2.0}"#).unwrap();
        assert_eq!(m, Measure::density(2.0).unwrap());
        let m = Measure::from_json(r#"{"variant": "atomic", "atoms": [[0.1, 0.2, 3.0], [0.0, -0.5, 1.0]]}"#).unwrap();
        match &m {
            Measure::Atomic { atoms } => {
                assert_eq!(atoms.len(), 2);
                assert_eq!(atoms[0].mass, 3.0);
                assert_eq!(atoms[1].point.coords()[0], c(0.0, -0.5));
            }
            _ => panic!(),
        }
        let mix = Measure::mixture(vec![m.clone(), Measure::volume()]).unwrap();
        assert_eq!(Measure::from_json(&mix.to_json().unwrap()).unwrap(), mix);
        assert!(Measure::from_json(r#"{"variant": "atomic", "atoms": [[0.1, 0.2]]}"#).is_err());
    }

    #[test]
    fn shift_examples() {
        assert_eq!(shift_measure(&Measure::volume(), 2.0).unwrap(), Measure::density(2.0).unwrap());
        let atoms: Vec<(Point, f64)> = (1..30)
            .map(|k| (Point::disk(Complex64::from_polar(1.0 - 0.5f64.powi(k), k as f64)).unwrap(), 0.1 * k as f64))
            .collect();
        let mu = Measure::mixture(vec![Measure::atomic(atoms).unwrap(), Measure::density(0.5).unwrap()]).unwrap();
        let back = shift_measure(&shift_measure(&mu, 1.7).unwrap(), -1.7).unwrap();
        let (m1, m2) = match (&mu, &back) {
            (Measure::Mixture { members: a }, Measure::Mixture { members: b }) => (a[0].clone(), b[0].clone()),
            _ => panic!(),
        };
        if let (Measure::Atomic { atoms: a }, Measure::Atomic { atoms: b }) = (m1, m2) {
            for (x, y) in a.iter().zip(&b) {
                assert!((x.mass - y.mass).abs() <= 1e-15 * x.mass * 4.0);
            }
        }
    }

    #[test]
    fn berezin_of_volume_is_one() {
        let rule = QuadratureRule::default();
        for dom in [ModelDomain::disk(), ModelDomain::ball(2).unwrap()] {
            for x in [0.0, 0.3, 0.9, 0.999] {
                let z = dom.point_on_axis(x).unwrap();
                let b = berezin_transform(&Measure::volume(), &dom, &z, &rule).unwrap();
                assert!((b - 1.0).abs() < 1e-4, "{x}: {b}");
            }
        }
    }

    #[test]
    fn berezin_of_atom() {
        let d = ModelDomain::disk();
        let w0 = Point::disk(c(0.2, -0.7)).unwrap();
        let z = Point::disk(c(0.5, 0.1)).unwrap();
        let b = berezin_transform(&Measure::atomic(vec![(w0.clone(), 1.0)]).unwrap(), &d, &z, &QuadratureRule::default()).unwrap();
        let k = crate::kernel::normalized_kernel(&d, &z, &w0).unwrap();
        assert!((b - k.norm_sqr()).abs() < 1e-12 * b);
    }

    #[test]
    fn sequence_construction() {
        let d = ModelDomain::disk();
        let seq = generate_uniformly_discrete(&d, 0.5, 1e-2).unwrap();
        assert!(min_kobayashi_separation(seq.points(), 1.0) >= 0.5 * (1.0 - 1e-9));
        assert!(seq.points()[0].norm() == 0.0);
        let empty = SequenceFamily::new(vec![], 0.5).unwrap();
        assert_eq!(counting_function(&empty, &d.origin(), 0.5).unwrap(), 0);
        let z0 = Point::disk(c(0.3, 0.3)).unwrap();
        let one = SequenceFamily::new(vec![z0.clone()], 0.5).unwrap();
        assert_eq!(counting_function(&one, &z0, 0.01).unwrap(), 1);
        // eps = 1 > 2 atanh(0.2): at most one point per ball
        let wide = generate_uniformly_discrete(&d, 1.0, 1e-3).unwrap();
        for z in crate::lattice::hyperbolic_samples(&d, 2000, 1e-3, 2) {
            assert!(counting_function(&wide, &z, 0.2).unwrap() <= 1);
        }
        assert!(SequenceFamily::new(vec![d.origin(), Point::disk(c(0.1, 0.0)).unwrap()], 0.5).is_err());
    }

    #[test]
    fn discrete_measure_masses() {
        let d = ModelDomain::disk();
        let one = SequenceFamily::new(vec![d.origin()], 1.0).unwrap();
        match discrete_theta_measure(&one, 1.0).unwrap() {
            Measure::Atomic { atoms } => assert_eq!(atoms[0].mass, 1.0),
            _ => panic!(),
        }
        let pts: Vec<Point> = (1..=8).map(|j| d.point_on_axis(1.0 - 2f64.powi(-j)).unwrap()).collect();
        let seq = SequenceFamily::new(pts, 0.3).unwrap();
        match discrete_theta_measure(&seq, 1.0).unwrap() {
            Measure::Atomic { atoms } => {
                for (j, a) in atoms.iter().enumerate() {
                    let e = 4f64.powi(-(j as i32 + 1));
                    assert!((a.mass - e).abs() < 1e-12 * e);
                }
            }
            _ => panic!(),
        }
    }

    #[test]
    fn decades_split_correctly() {
        assert_eq!(decade_of(1.0), 0);
        assert_eq!(decade_of(0.1), 1);
        assert_eq!(decade_of(0.5), 0);
        assert_eq!(decade_of(0.099), 1);
        assert_eq!(decade_of(1e-4), 4);
    }

    #[test]
    fn volume_profile_is_flat() {
        let d = ModelDomain::disk();
        let lat = crate::lattice::build_lattice(&d, 0.5, 1e-3).unwrap();
        let p = carleson_profile(&Measure::volume(), &d, &lat, 1.0).unwrap();
        assert!(p.samples.iter().all(|s| (s.1 - 1.0).abs() < 1e-9));
        assert!(p.decay_trend.abs() < 1e-6);
        assert_eq!(p.vanishing_verdict(DecadeStatistic::Median), VanishingVerdict::NonVanishing);
        assert_eq!(p.carleson_verdict(&Thresholds::default()), CarlesonVerdict::Bounded);
    }
}
