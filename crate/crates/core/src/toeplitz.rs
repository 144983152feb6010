//! Toeplitz operators `T_mu f(z) = int K(z, w) f(w) dmu(w)`, weighted
//! Bergman norms of test functions, ratio sweeps, the Berezin identity and
//! the integrability gain of `T_{delta^eta}`.
//!
//! Density parts of `mu` are radial, so `T_mu` is diagonal on homogeneous
//! polynomials with eigenvalues `lambda_k = (2k + 2n) int_0^1 t^{2k+2n-1} rho(t) dt`.
//! Summing the series of `(1 - <w, a>)^{-s}` gives
//!
//! `T f(z) = 2 int_0^1 t^{2n-1} rho(t) (1 - x t^2)^{-s-1} (n (1 - x t^2) + s x t^2) dt`,
//! `x = <z, a>`,
//!
//! evaluated in `d = 1 - t` on panels graded toward `d = 0`. Atoms contribute
//! `sum m_j K(z, z_j) f(z_j)`.
//!
//! Norms of functions of `<w, xi>` alone (`|xi| = 1`) are computed in the
//! coordinates `<w, xi> = 1 - u e^{i phi}`, `cos phi > u/2`, where the
//! boundary singularity sits at `u = 0`. The part `u < u_min` is closed by
//! the local power law of the ring integrals at `u_min` and `2 u_min`; a
//! local exponent `<= -1` is reported as divergence.

use std::cell::Cell;
use std::f64::consts::LN_2;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{csv_field, fmt_num};
use crate::error::{LabError, Result};
use crate::geometry::{factorial, inner, norm_sq, ModelDomain, Point};
use crate::kernel::{kernel_constant, kernel_raw, offset_map};
use crate::measures::{berezin_transform, eval_g, Measure};
use crate::quadrature::{
    gauss_legendre, graded_unit_interval, integrate_value, panel_nodes, panels_toward_end, panels_toward_start,
    NodeRef, QuadratureRule,
};

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Tolerance for treating a singular centre as a boundary point.
const BOUNDARY_TOL: f64 = 1e-12;

/// Function `f` fed to `T_mu` and to the weighted norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum TestFunction {
    /// `(1 - <z, a>)^{-s}` with `|a| <= 1`; boundary-singular when `|a| = 1`.
    Singular { a: Vec<Complex64>, s: f64 },
    Monomial { exponents: Vec<u32> },
    NormalizedKernel { z0: Point },
    Combination { terms: Vec<(Complex64, TestFunction)> },
}

/// `scale (1 - <w, a>)^{-s}` seen from the frame `xi = a/|a|`.
#[derive(Debug, Clone)]
struct Zonal {
    scale: f64,
    a: Vec<Complex64>,
    a_norm: f64,
    s: f64,
}

impl Zonal {
    /// `1 - <w, a>` from `c = 1 - <w, xi>`.
    fn c1(&self, c: Complex64) -> Complex64 {
        (1.0 - self.a_norm) + c * self.a_norm
    }
}

impl TestFunction {
    pub fn singular(a: Vec<Complex64>, s: f64) -> Result<Self> {
        let f = TestFunction::Singular { a, s };
        f.check_shape()?;
        Ok(f)
    }

    /// `(1 - z_1)^{-s}`: singular at the boundary point `e_1`.
    pub fn boundary_singular(domain: &ModelDomain, s: f64) -> Result<Self> {
        TestFunction::singular(domain.axis(), s)
    }

    pub fn monomial(exponents: Vec<u32>) -> Self {
        TestFunction::Monomial { exponents }
    }

    pub fn normalized_kernel(z0: Point) -> Self {
        TestFunction::NormalizedKernel { z0 }
    }

    pub fn combination(terms: Vec<(Complex64, TestFunction)>) -> Self {
        TestFunction::Combination { terms }
    }

    fn check_shape(&self) -> Result<()> {
        match self {
            TestFunction::Singular { a, s } => {
                if !(*s > 0.0 && s.is_finite()) {
                    return Err(LabError::param("s", format!("must be > 0, got {s}")));
                }
                if a.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) || norm_sq(a).sqrt() > 1.0 + BOUNDARY_TOL {
                    return Err(LabError::param("a", "singular centre must satisfy |a| <= 1"));
                }
                Ok(())
            }
            TestFunction::Combination { terms } if terms.is_empty() => {
                Err(LabError::param("terms", "empty combination"))
            }
            TestFunction::Combination { terms } => terms.iter().try_for_each(|(_, t)| t.check_shape()),
            _ => Ok(()),
        }
    }

    pub fn validate(&self, domain: &ModelDomain) -> Result<()> {
        self.check_shape()?;
        let n = domain.dim();
        match self {
            TestFunction::Singular { a, .. } if a.len() != n => Err(LabError::DimensionMismatch {
                expected: n,
                got: a.len(),
            }),
            TestFunction::Monomial { exponents } if exponents.len() != n => Err(LabError::DimensionMismatch {
                expected: n,
                got: exponents.len(),
            }),
            TestFunction::NormalizedKernel { z0 } => domain.check(z0),
            TestFunction::Combination { terms } => terms.iter().try_for_each(|(_, t)| t.validate(domain)),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, z: &Point) -> Complex64 {
        self.eval_raw(z.coords())
    }

    pub(crate) fn eval_raw(&self, z: &[Complex64]) -> Complex64 {
        match self {
            TestFunction::Singular { a, s } => (ONE - inner(z, a)).powf(-s),
            TestFunction::Monomial { exponents } => monomial_value(exponents, z),
            TestFunction::NormalizedKernel { z0 } => {
                let zf = self.zonal_form(z0.dim());
                zf.scale * (ONE - inner(z, z0.coords())).powi(-(z0.dim() as i32 + 1))
            }
            TestFunction::Combination { terms } => terms.iter().map(|(c, t)| c * t.eval_raw(z)).sum(),
        }
    }

    /// Boundary-singular pieces: `(centre, exponent)`.
    fn boundary_singularities(&self) -> Vec<(&[Complex64], f64)> {
        match self {
            TestFunction::Singular { a, s } if norm_sq(a).sqrt() >= 1.0 - BOUNDARY_TOL => vec![(a.as_slice(), *s)],
            TestFunction::Combination { terms } => terms.iter().flat_map(|(_, t)| t.boundary_singularities()).collect(),
            _ => Vec::new(),
        }
    }

    fn zonal_form(&self, n: usize) -> Zonal {
        match self {
            TestFunction::Singular { a, s } => Zonal {
                scale: 1.0,
                a: a.clone(),
                a_norm: norm_sq(a).sqrt().min(1.0),
                s: *s,
            },
            TestFunction::NormalizedKernel { z0 } => {
                let d = z0.delta();
                let one_minus_sq = d * (2.0 - d);
                Zonal {
                    scale: kernel_constant(n).sqrt() * one_minus_sq.powf(0.5 * (n + 1) as f64),
                    a: z0.coords().to_vec(),
                    a_norm: z0.norm(),
                    s: (n + 1) as f64,
                }
            }
            _ => unreachable!("zonal_form on a non-zonal function"),
        }
    }

    /// Functions of `<w, a>` alone with `a != 0`.
    fn zonal(&self, n: usize) -> Option<Zonal> {
        match self {
            TestFunction::Singular { .. } | TestFunction::NormalizedKernel { .. } => {
                let z = self.zonal_form(n);
                (z.a_norm > 0.0).then_some(z)
            }
            _ => None,
        }
    }

    /// Direction to focus boundary-refined layouts on.
    fn focus_dir(&self) -> Option<Vec<Complex64>> {
        match self {
            TestFunction::Singular { a, .. } if norm_sq(a) > 0.25 => Some(a.clone()),
            TestFunction::NormalizedKernel { z0 } if z0.norm() >= 0.5 => Some(z0.coords().to_vec()),
            TestFunction::Combination { terms } => terms.iter().find_map(|(_, t)| t.focus_dir()),
            _ => None,
        }
    }
}

fn monomial_value(exponents: &[u32], z: &[Complex64]) -> Complex64 {
    exponents
        .iter()
        .zip(z)
        .fold(ONE, |acc, (e, zk)| acc * zk.powu(*e))
}

/// `f_{a, s}` for each `s`, with `a` the boundary point `e_1`.
pub fn singular_family(domain: &ModelDomain, exponents: &[f64]) -> Result<Vec<TestFunction>> {
    exponents.iter().map(|s| TestFunction::boundary_singular(domain, *s)).collect()
}

/// Gauss rule in `d = 1 - t` on panels `[q^{k+1}, q^k]`, refined until the
/// last edge is below `1e-3 scale`, closed by `[0, q^K]`.
#[derive(Debug, Clone)]
struct RadialRule {
    x: Vec<f64>,
    w: Vec<f64>,
    q: f64,
}

impl RadialRule {
    fn new(q: f64) -> Self {
        let (x, w) = gauss_legendre(16);
        RadialRule { x, w, q }
    }

    fn for_each(&self, scale: f64, mut f: impl FnMut(f64, f64)) {
        let depth = ((1e-3 * scale.min(1e-3)).ln() / self.q.ln()).ceil().clamp(1.0, 80.0) as i32;
        let mut hi = 1.0;
        for k in 0..=depth {
            let lo = if k == depth { 0.0 } else { hi * self.q };
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            for (xi, wi) in self.x.iter().zip(&self.w) {
                f(mid + half * xi, half * wi);
            }
            hi = lo;
        }
    }
}

/// `T_mu` on a model domain.
#[derive(Debug, Clone)]
pub struct ToeplitzOperator {
    mu: Measure,
    domain: ModelDomain,
    rule: QuadratureRule,
    radial: RadialRule,
    dens: Vec<(f64, Vec<f64>)>,
    atoms: Vec<(Vec<Complex64>, f64)>,
}

impl ToeplitzOperator {
    pub fn new(mu: Measure, domain: ModelDomain, rule: QuadratureRule) -> Result<Self> {
        mu.validate()?;
        mu.check_domain(&domain)?;
        rule.validate()?;
        let (d, a) = mu.parts();
        let dens = d.into_iter().map(|(e, g)| (e, g.to_vec())).collect();
        let atoms = a.into_iter().map(|a| (a.point.coords().to_vec(), a.mass)).collect();
        Ok(ToeplitzOperator {
            radial: RadialRule::new(rule.grading),
            mu,
            domain,
            rule,
            dens,
            atoms,
        })
    }

    pub fn measure(&self) -> &Measure {
        &self.mu
    }

    pub fn domain(&self) -> &ModelDomain {
        &self.domain
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// Eigenvalue of the density part on homogeneous polynomials of degree `k`.
    pub fn eigenvalue(&self, k: u32) -> f64 {
        let n = self.domain.dim() as i32;
        let e = 2 * k as i32 + 2 * n - 1;
        let mut total = 0.0;
        for (eta, g) in &self.dens {
            let mut acc = 0.0;
            self.radial.for_each(1e-6, |d, w| {
                let t = 1.0 - d;
                acc += w * t.powi(e) * rho(*eta, g, d);
            });
            total += (e + 1) as f64 * acc;
        }
        total
    }

    /// Image of `(1 - <., a>)^{-s}` under the density part, from `c1 = 1 - <z, a>`.
    fn singular_image(&self, c1: Complex64, s: f64) -> Complex64 {
        let n = self.domain.dim();
        let x = ONE - c1;
        let int_pow = (s + 1.0).fract() == 0.0 && s + 1.0 <= 64.0;
        let mut total = Complex64::new(0.0, 0.0);
        for (eta, g) in &self.dens {
            let mut acc = Complex64::new(0.0, 0.0);
            self.radial.for_each(c1.norm(), |d, w| {
                let t = 1.0 - d;
                let t2 = t * t;
                let big_d = c1 * t2 + d * (2.0 - d);
                let pw = if int_pow {
                    big_d.powi(-((s + 1.0) as i32))
                } else {
                    big_d.powf(-s - 1.0)
                };
                let lin = big_d * n as f64 + x * (s * t2);
                acc += pw * lin * (w * t.powi(2 * n as i32 - 1) * rho(*eta, g, d));
            });
            total += acc * 2.0;
        }
        total
    }

    fn density_image(&self, f: &TestFunction, z: &[Complex64], hint: Option<Complex64>) -> Complex64 {
        if self.dens.is_empty() {
            return Complex64::new(0.0, 0.0);
        }
        let n = self.domain.dim();
        match f {
            TestFunction::Singular { .. } | TestFunction::NormalizedKernel { .. } => {
                let zf = f.zonal_form(n);
                let c1 = hint.unwrap_or_else(|| ONE - inner(z, &zf.a));
                self.singular_image(c1, zf.s) * zf.scale
            }
            TestFunction::Monomial { exponents } => {
                self.eigenvalue(exponents.iter().sum()) * monomial_value(exponents, z)
            }
            TestFunction::Combination { terms } => terms.iter().map(|(c, t)| c * self.density_image(t, z, None)).sum(),
        }
    }

    fn atomic_image(&self, f: &TestFunction, z: &[Complex64]) -> Complex64 {
        self.atoms
            .iter()
            .map(|(p, m)| kernel_raw(z, p) * f.eval_raw(p) * *m)
            .sum()
    }

    /// `T_mu f` at raw coordinates; `hint` is `1 - <z, a>` for zonal `f`.
    fn image(&self, f: &TestFunction, z: &[Complex64], hint: Option<Complex64>) -> Complex64 {
        self.density_image(f, z, hint) + self.atomic_image(f, z)
    }

    /// `int |f| dmu < inf`: a boundary singularity of exponent `s` against a
    /// density member `delta^eta` needs `s < n + 1 + eta`.
    pub fn check_integrable(&self, f: &TestFunction) -> Result<()> {
        f.validate(&self.domain)?;
        let np1 = (self.domain.dim() + 1) as f64;
        for (_, s) in f.boundary_singularities() {
            for (eta, _) in &self.dens {
                if s >= np1 + eta {
                    return Err(LabError::param(
                        "f",
                        format!("(1 - <z, a>)^(-{s}) is not integrable against delta^{eta}: need s < {}", np1 + eta),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn apply(&self, f: &TestFunction, z: &Point) -> Result<Complex64> {
        self.domain.check(z)?;
        self.check_integrable(f)?;
        Ok(self.image(f, z.coords(), None))
    }

    /// `T_mu f(z)` by direct quadrature of `K(z, w) f(w) rho(w)`: the
    /// cross-check of [`ToeplitzOperator::apply`].
    pub fn apply_quadrature(&self, f: &TestFunction, z: &Point) -> Result<Complex64> {
        self.domain.check(z)?;
        self.check_integrable(f)?;
        let zc = z.coords();
        let mut total = self.atomic_image(f, zc);
        if !self.dens.is_empty() {
            let r = if self.domain.dim() == 1 {
                match f.focus_dir() {
                    Some(a) => self.rule.focused(&a),
                    None => self.rule.unfocused(),
                }
            } else {
                self.rule.unfocused()
            };
            let (dens, _) = self.mu.parts();
            total += integrate_value(
                &self.domain,
                |node: NodeRef<'_>| {
                    kernel_raw(zc, node.z) * f.eval_raw(node.z) * crate::measures::density_sum(&dens, node.delta)
                },
                &r,
            )?;
        }
        Ok(total)
    }
}

fn rho(eta: f64, g: &[f64], d: f64) -> f64 {
    let t = 1.0 - d;
    let w = if eta == 0.0 { 1.0 } else { d.powf(eta) };
    w * eval_g(g, t * t)
}

/// A weighted norm or the divergence flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormValue {
    Finite(f64),
    Divergent,
}

impl NormValue {
    pub fn value(&self) -> Option<f64> {
        match self {
            NormValue::Finite(v) => Some(*v),
            NormValue::Divergent => None,
        }
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, NormValue::Divergent)
    }
}

impl std::fmt::Display for NormValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NormValue::Finite(v) => write!(f, "{}", fmt_num(*v)),
            NormValue::Divergent => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct ZNode {
    /// `1 - <w, xi>`
    c: Complex64,
    w: f64,
    /// Largest boundary distance over the fibre of the node.
    delta: f64,
}

/// Nodes for functions of `<w, xi>` times `delta^beta`.
#[derive(Debug, Clone)]
struct ZonalRule {
    main: Vec<ZNode>,
    /// Rings at `u_min` and `2 u_min`, weights without the `du` factor.
    probes: [Vec<ZNode>; 2],
    u_min: f64,
    beta: f64,
}

fn delta_from_s(s: f64) -> f64 {
    s / (1.0 + (1.0 - s).max(0.0).sqrt())
}

impl ZonalRule {
    fn new(n: usize, beta: f64, rule: &QuadratureRule) -> Self {
        let m = rule.radial_nodes;
        let q = rule.grading;
        let u_min = rule.boundary_cutoff;
        let tau = if n >= 2 && beta != 0.0 {
            graded_unit_interval(m, q, 1e-12)
        } else {
            Vec::new()
        };
        let ring = |u: f64| ring_nodes(n, beta, u, m, q, &tau);
        let mut panels = panels_toward_start(u_min, 1.0, q, u_min);
        panels.extend(panels_toward_end(1.0, 2.0, q, 1e-9));
        let main = panel_nodes(&panels, m)
            .into_iter()
            .flat_map(|(u, wu)| {
                ring(u).into_iter().map(move |mut z| {
                    z.w *= wu;
                    z
                })
            })
            .collect();
        ZonalRule {
            main,
            probes: [ring(u_min), ring(2.0 * u_min)],
            u_min,
            beta,
        }
    }

    fn values(&self, h: impl Fn(Complex64) -> f64 + Sync) -> ZonalValues {
        let eval = |v: &[ZNode]| v.par_iter().map(|z| h(z.c)).collect::<Vec<_>>();
        ZonalValues {
            main: eval(&self.main),
            probes: [eval(&self.probes[0]), eval(&self.probes[1])],
        }
    }

    /// `||h||_{p, beta}` from `log |h|` at the nodes.
    fn norm(&self, logs: &ZonalValues, p: f64) -> NormValue {
        if p.is_infinite() {
            let sup = |nodes: &[ZNode], v: &[f64]| {
                nodes
                    .iter()
                    .zip(v)
                    .map(|(z, l)| l + if self.beta != 0.0 { self.beta * z.delta.ln() } else { 0.0 })
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            let s0 = sup(&self.probes[0], &logs.probes[0]);
            let s1 = sup(&self.probes[1], &logs.probes[1]);
            if (s0 - s1) / LN_2 > 0.05 {
                return NormValue::Divergent;
            }
            return NormValue::Finite(sup(&self.main, &logs.main).max(s0).max(s1).exp());
        }
        let sum = |nodes: &[ZNode], v: &[f64]| -> f64 { nodes.iter().zip(v).map(|(z, l)| z.w * (p * l).exp()).sum() };
        let main = sum(&self.main, &logs.main);
        let f1 = sum(&self.probes[0], &logs.probes[0]);
        let f2 = sum(&self.probes[1], &logs.probes[1]);
        let tail = if f1 > 0.0 {
            let e = (f2 / f1).ln() / LN_2;
            if !(e > -1.0) {
                return NormValue::Divergent;
            }
            f1 * self.u_min / (e + 1.0)
        } else {
            0.0
        };
        let total = main + tail;
        if !total.is_finite() {
            return NormValue::Divergent;
        }
        NormValue::Finite(total.powf(1.0 / p))
    }
}

#[derive(Debug, Clone)]
struct ZonalValues {
    main: Vec<f64>,
    probes: [Vec<f64>; 2],
}

/// Nodes on the ring `|1 - <w, xi>| = u`: `phi = +-(phi_max - psi)`, the two
/// signs folded together (the integrands are even in `phi`).
fn ring_nodes(n: usize, beta: f64, u: f64, m: usize, q: f64, tau: &[(f64, f64)]) -> Vec<ZNode> {
    let phi_max = (0.5 * u).min(1.0).acos();
    let sin_max = phi_max.sin();
    let graded = beta != 0.0;
    let panels = if graded {
        panels_toward_start(0.0, phi_max, q, phi_max * 1e-10)
    } else {
        (0..4).map(|k| (phi_max * k as f64 / 4.0, phi_max * (k + 1) as f64 / 4.0)).collect()
    };
    let vol_fibre = if n == 1 {
        1.0
    } else if beta == 0.0 {
        std::f64::consts::PI.powi(n as i32 - 1) / factorial(n - 1)
    } else {
        std::f64::consts::PI.powi(n as i32 - 1) / factorial(n - 2)
    };
    panel_nodes(&panels, if graded { m } else { 12 })
        .into_iter()
        .filter_map(|(psi, wpsi)| {
            let half = (0.5 * psi).sin();
            // 1 - |w_1|^2 = 2u cos(phi) - u^2 without cancellation
            let s = 2.0 * u * (sin_max * psi.sin() - u * half * half);
            if !(s > 0.0) {
                return None;
            }
            let phi = phi_max - psi;
            let delta = delta_from_s(s.min(1.0));
            let geom = match (n, beta == 0.0) {
                (1, true) => 1.0,
                (1, false) => delta.powf(beta),
                (_, true) => s.powi(n as i32 - 1),
                (_, false) => {
                    let fib: f64 = tau
                        .iter()
                        .map(|(t, wt)| wt * t.powi(n as i32 - 2) * delta_from_s(s * (1.0 - t)).powf(beta))
                        .sum();
                    s.powi(n as i32 - 1) * fib
                }
            };
            Some(ZNode {
                c: Complex64::from_polar(u, phi),
                w: 2.0 * u * wpsi * vol_fibre * geom,
                delta,
            })
        })
        .collect()
}

fn check_norm_params(p: f64, beta: f64) -> Result<()> {
    if !(p >= 1.0) {
        return Err(LabError::param("p", format!("must lie in [1, inf], got {p}")));
    }
    if p.is_infinite() {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(LabError::param("beta", "must be >= 0 for p = inf"));
        }
    } else if !(beta > -1.0 && beta.is_finite()) {
        return Err(LabError::param("beta", "must be > -1 for finite p"));
    }
    Ok(())
}

/// Cutoffs of the boundary-refinement ladder behind the divergence flag.
const LADDER: [f64; 3] = [1e-4, 1e-6, 1e-8];

/// `||h||_{p, beta}` by quadrature of `|h|` (given as `log |h|` per node); a
/// value growing by more than 25% on each of two refinements is divergent.
fn generic_norm(
    domain: &ModelDomain,
    rule: &QuadratureRule,
    p: f64,
    beta: f64,
    log_h: impl Fn(NodeRef<'_>) -> f64 + Sync,
) -> Result<NormValue> {
    let weight = |node: &NodeRef<'_>| if beta != 0.0 { beta * node.delta.ln() } else { 0.0 };
    if p.is_infinite() {
        let best = Cell::new(f64::NEG_INFINITY);
        integrate_value(
            domain,
            |node: NodeRef<'_>| {
                let e = log_h(node) + weight(&node);
                if e > best.get() {
                    best.set(e);
                }
                0.0
            },
            rule,
        )?;
        return Ok(NormValue::Finite(best.get().exp()));
    }
    let integrand = |node: NodeRef<'_>| (p * log_h(node) + weight(&node)).exp();
    let ladder: Vec<f64> = LADDER
        .iter()
        .map(|c| integrate_value(domain, integrand, &rule.clone().with_cutoff(*c)))
        .collect::<Result<_>>()?;
    if ladder[1] > 1.25 * ladder[0] && ladder[2] > 1.25 * ladder[1] {
        return Ok(NormValue::Divergent);
    }
    let v = integrate_value(domain, integrand, rule)?;
    Ok(if v.is_finite() {
        NormValue::Finite(v.powf(1.0 / p))
    } else {
        NormValue::Divergent
    })
}

fn zonal_rule_for(domain: &ModelDomain, beta: f64, rule: &QuadratureRule) -> ZonalRule {
    ZonalRule::new(domain.dim(), beta, rule)
}

/// `||f||_{p, beta} = (int |f|^p delta^beta dnu)^{1/p}`, or the sup for `p = inf`.
pub fn weighted_norm(
    f: &TestFunction,
    p: f64,
    beta: f64,
    domain: &ModelDomain,
    rule: &QuadratureRule,
) -> Result<NormValue> {
    check_norm_params(p, beta)?;
    f.validate(domain)?;
    rule.validate()?;
    let n = domain.dim();
    if let Some(zf) = f.zonal(n) {
        let zr = zonal_rule_for(domain, beta, rule);
        let logs = zr.values(|c| zf.scale.ln() - zf.s * zf.c1(c).norm().ln());
        return Ok(zr.norm(&logs, p));
    }
    let r = match f.focus_dir() {
        Some(a) if n == 1 => rule.focused(&a),
        _ => rule.unfocused(),
    };
    generic_norm(domain, &r, p, beta, |node| f.eval_raw(node.z).norm().ln())
}

/// `||T_mu f||_r`, unweighted.
pub fn toeplitz_norm(t: &ToeplitzOperator, f: &TestFunction, r: f64) -> Result<NormValue> {
    check_norm_params(r, 0.0)?;
    t.check_integrable(f)?;
    let n = t.domain.dim();
    if let (Some(zf), true) = (f.zonal(n), t.atoms.is_empty()) {
        let zr = zonal_rule_for(&t.domain, 0.0, &t.rule);
        let logs = zr.values(|c| (t.singular_image(zf.c1(c), zf.s) * zf.scale).norm().ln());
        return Ok(zr.norm(&logs, r));
    }
    let rule = match f.focus_dir() {
        Some(a) if n == 1 => t.rule.focused(&a),
        _ => t.rule.unfocused(),
    };
    generic_norm(&t.domain, &rule, r, 0.0, |node| t.image(f, node.z, None).norm().ln())
}

/// Family verdict: bounded, or blow-up (a divergent member, or ratios
/// growing along the family past [`RATIO_BAND`] times the first member's).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RatioVerdict {
    Bounded,
    BlowUp,
}

impl std::fmt::Display for RatioVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RatioVerdict::Bounded => "bounded",
            RatioVerdict::BlowUp => "blow-up",
        })
    }
}

/// Growth allowed for a bounded verdict: max ratio over the ratio of the
/// least concentrated (first) member.
pub const RATIO_BAND: f64 = 10.0;

fn verdict_of(ratios: &[Option<f64>]) -> (Option<f64>, Option<f64>, RatioVerdict) {
    if ratios.iter().any(|r| r.is_none()) {
        return (None, None, RatioVerdict::BlowUp);
    }
    let v: Vec<f64> = ratios.iter().flatten().copied().collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let band = max / v[0];
    let verdict = if band <= RATIO_BAND {
        RatioVerdict::Bounded
    } else {
        RatioVerdict::BlowUp
    };
    (Some(max), Some(band), verdict)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// `||T f||_r / ||f||_{p, beta}` per member, `None` when `||T f||_r` diverges.
    pub ratios: Vec<Option<f64>>,
    pub max_ratio: Option<f64>,
    /// `max_ratio` over the first member's ratio.
    pub band: Option<f64>,
    pub verdict: RatioVerdict,
}

/// `max_f ||T f||_r / ||f||_{p, beta}` over `family`.
pub fn operator_ratio_sweep(
    t: &ToeplitzOperator,
    family: &[TestFunction],
    p: f64,
    beta: f64,
    r: f64,
) -> Result<SweepResult> {
    if family.is_empty() {
        return Err(LabError::param("family", "empty"));
    }
    let ratios: Vec<Option<f64>> = family
        .par_iter()
        .map(|f| {
            let num = weighted_norm(f, p, beta, &t.domain, &t.rule)?;
            let num = num.value().ok_or_else(|| {
                LabError::param("family", format!("member {f:?} has divergent ||f||_(p, beta)"))
            })?;
            Ok(toeplitz_norm(t, f, r)?.value().map(|v| v / num))
        })
        .collect::<Result<_>>()?;
    let (max_ratio, band, verdict) = verdict_of(&ratios);
    Ok(SweepResult {
        ratios,
        max_ratio,
        band,
        verdict,
    })
}

/// Regime of the gain theorem for `T_{delta^eta}` on `L^p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GainCase {
    /// `(n+1)/(n+1-eta) < p'`: bounded exactly up to `r = p + G`.
    Sharp,
    /// `(n+1)/(n+1-eta) >= p'`: bounded for every `r >= p`.
    AllExponents,
    /// `eta >= n+1`: `L^1 -> L^inf`.
    OneToInfinity,
}

/// Fractions of the critical exponent spanned by the singular family.
pub const FAMILY_FRACTIONS: [f64; 7] = [0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainRow {
    #[serde(with = "extended_f64")]
    pub r: f64,
    pub ratios: Vec<Option<f64>>,
    /// `None` when some member has `||T f||_r = inf`.
    pub max_ratio: Option<f64>,
    pub verdict: RatioVerdict,
    /// Theoretical verdict, absent inside the margin above `p + G`.
    pub expected: Option<RatioVerdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainReport {
    pub n: usize,
    pub eta: f64,
    pub p: f64,
    pub case: GainCase,
    /// `p^2 / ((n+1)/eta - p)` in the sharp case.
    pub g_theoretical: Option<f64>,
    pub sharp_r: Option<f64>,
    /// Exponents `s` of the family `(1 - z_1)^{-s}`.
    pub family: Vec<f64>,
    pub rows: Vec<GainRow>,
    /// First grid exponent with a blow-up verdict.
    #[serde(with = "extended_opt_f64")]
    pub flip_r: Option<f64>,
}

/// Blow-up is expected from `p + G + BLOWUP_MARGIN` on.
pub const BLOWUP_MARGIN: f64 = 0.5;

impl GainReport {
    /// Verdicts agree with the theorem wherever it predicts one, and in the
    /// sharp case the first blow-up lies within one grid step above `p + G`.
    pub fn consistent(&self) -> bool {
        let matches = self
            .rows
            .iter()
            .all(|row| row.expected.is_none_or(|e| e == row.verdict));
        match (self.case, self.sharp_r) {
            (GainCase::Sharp, Some(sharp)) => {
                let step = self
                    .rows
                    .windows(2)
                    .map(|w| w[1].r - w[0].r)
                    .fold(f64::INFINITY, f64::min);
                matches && self.flip_r.is_some_and(|f| f > sharp && f <= sharp + step + 1e-9)
            }
            _ => matches && self.flip_r.is_none(),
        }
    }

    /// Columns `r, max_ratio, verdict`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,max_ratio,verdict\n");
        for row in &self.rows {
            let m = row.max_ratio.map_or("inf".to_string(), fmt_num);
            let r = if row.r.is_infinite() { "inf".to_string() } else { fmt_num(row.r) };
            out.push_str(&format!("{},{},{}\n", csv_field(&r), csv_field(&m), row.verdict));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| LabError::Io(e.to_string()))
    }
}

/// Exponent grids round to a quarter so that `p + G` lands on a grid point.
fn quarter_grid(lo: f64, hi: f64) -> Vec<f64> {
    let steps = ((hi - lo) / 0.25 + 1e-9).floor() as usize;
    (0..=steps).map(|k| lo + 0.25 * k as f64).collect()
}

/// Classifies `(eta, p)` against the gain theorem.
pub fn gain_case(n: usize, eta: f64, p: f64) -> Result<GainCase> {
    let np1 = (n + 1) as f64;
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(LabError::param("eta", format!("must be > 0, got {eta}")));
    }
    if eta >= np1 {
        return Ok(GainCase::OneToInfinity);
    }
    if !(p > 1.0 && p.is_finite()) {
        return Err(LabError::param("p", format!("must lie in (1, inf) for eta < n + 1, got {p}")));
    }
    let p_conj = p / (p - 1.0);
    Ok(if np1 / (np1 - eta) < p_conj {
        GainCase::Sharp
    } else {
        GainCase::AllExponents
    })
}

/// `G = p^2 / ((n+1)/eta - p)`.
pub fn gain_exponent(n: usize, eta: f64, p: f64) -> f64 {
    p * p / ((n + 1) as f64 / eta - p)
}

/// Ratios `||T_{delta^eta} f_s||_r / ||f_s||_p` over the singular family for
/// each `r` of the grid. `p` is ignored (set to 1) when `eta >= n+1`, where
/// the grid is `r = inf`.
pub fn gain_experiment(
    eta: f64,
    p: f64,
    domain: &ModelDomain,
    r_grid: Option<&[f64]>,
    rule: &QuadratureRule,
) -> Result<GainReport> {
    let n = domain.dim();
    let np1 = (n + 1) as f64;
    let case = gain_case(n, eta, p)?;
    let p = if case == GainCase::OneToInfinity { 1.0 } else { p };
    let (g, sharp) = match case {
        GainCase::Sharp => {
            let g = gain_exponent(n, eta, p);
            (Some(g), Some(p + g))
        }
        _ => (None, None),
    };
    let grid: Vec<f64> = match (r_grid, case) {
        (Some(gr), _) => gr.to_vec(),
        (None, GainCase::Sharp) => quarter_grid(p, sharp.unwrap() + 1.0),
        (None, GainCase::AllExponents) => quarter_grid(p, 8.0),
        (None, GainCase::OneToInfinity) => vec![f64::INFINITY],
    };
    if grid.is_empty() || grid.iter().any(|r| !(*r >= p)) {
        return Err(LabError::param("r_grid", "exponents must satisfy r >= p"));
    }
    let s_max = np1 / p;
    let family: Vec<f64> = FAMILY_FRACTIONS.iter().map(|f| f * s_max).collect();
    let t = ToeplitzOperator::new(Measure::density(eta)?, domain.clone(), rule.clone())?;
    let zr = zonal_rule_for(domain, 0.0, rule);
    // per member: ||f_s||_p and log |T f_s| at the nodes, reused across the grid
    let cached: Vec<(f64, ZonalValues)> = family
        .iter()
        .map(|&s| {
            let f_logs = zr.values(|c| -s * c.norm().ln());
            let norm_f = zr.norm(&f_logs, p).value().ok_or_else(|| {
                LabError::param("family", format!("||f_s||_p diverges at s = {s}"))
            })?;
            let tf_logs = zr.values(|c| t.singular_image(c, s).norm().ln());
            Ok((norm_f, tf_logs))
        })
        .collect::<Result<_>>()?;
    let rows = grid
        .iter()
        .map(|&r| {
            let ratios: Vec<Option<f64>> = cached
                .iter()
                .map(|(nf, logs)| zr.norm(logs, r).value().map(|v| v / nf))
                .collect();
            let (max_ratio, _, verdict) = verdict_of(&ratios);
            let expected = match sharp {
                Some(sr) if r <= sr + 1e-9 => Some(RatioVerdict::Bounded),
                Some(sr) if r >= sr + BLOWUP_MARGIN - 1e-9 => Some(RatioVerdict::BlowUp),
                Some(_) => None,
                None => Some(RatioVerdict::Bounded),
            };
            GainRow {
                r,
                ratios,
                max_ratio,
                verdict,
                expected,
            }
        })
        .collect::<Vec<_>>();
    let flip_r = rows.iter().find(|r| r.verdict == RatioVerdict::BlowUp).map(|r| r.r);
    Ok(GainReport {
        n,
        eta,
        p,
        case,
        g_theoretical: g,
        sharp_r: sharp,
        family,
        rows,
        flip_r,
    })
}

/// `|B mu(z0) - <T_mu k_{z0}, k_{z0}>| / max(B mu(z0), 1e-12)`. The density
/// part of the inner product is a quadrature over the domain; for an atom
/// `<K(., z_j), k_{z0}> = conj(k_{z0}(z_j))` by the reproducing property.
pub fn berezin_identity_check(mu: &Measure, domain: &ModelDomain, z0: &Point, rule: &QuadratureRule) -> Result<f64> {
    domain.check(z0)?;
    if z0.delta() < 1e-3 * (1.0 - 1e-9) {
        return Err(LabError::param("z0", "needs delta(z0) >= 1e-3"));
    }
    let t = ToeplitzOperator::new(mu.clone(), domain.clone(), rule.clone())?;
    let lhs = berezin_transform(mu, domain, z0, rule)?;
    let n = domain.dim();
    let k = TestFunction::normalized_kernel(z0.clone());
    let zf = k.zonal_form(n);
    let mut rhs: Complex64 = t
        .atoms
        .iter()
        .map(|(p, m)| {
            let kp = k.eval_raw(p);
            kp * kp.conj() * *m
        })
        .sum();
    if !t.dens.is_empty() {
        let outer = rule.focused_near(z0);
        let off = offset_map(&outer, z0.coords());
        rhs += integrate_value(
            domain,
            |node: NodeRef<'_>| {
                let c = off(&node);
                let kw = c.powi(-(n as i32 + 1)) * zf.scale;
                let tk = if z0.norm() > 0.0 {
                    t.singular_image(c, zf.s) * zf.scale
                } else {
                    // k_0 is constant
                    Complex64::new(zf.scale * t.eigenvalue(0), 0.0)
                };
                tk * kw.conj()
            },
            &outer,
        )?;
    }
    Ok((rhs - lhs).norm() / lhs.max(1e-12))
}

/// Serde for `f64` that may be infinite: JSON strings `"inf"`, `"-inf"`.
mod extended_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("not a number: {s}"))),
        }
    }
}

mod extended_opt_f64 {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Wrap(#[serde(with = "super::extended_f64")] f64);

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.map(Wrap).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}
