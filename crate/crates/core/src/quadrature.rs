//! Integration over the disk and the ball.
//!
//! Every integrand in this crate concentrates at the boundary, so the
//! deterministic rules use Gauss-Legendre panels whose widths shrink
//! geometrically toward `|z| = 1`. Three node layouts exist:
//!
//! * polar: radius graded toward 1, then hyperspherical angles. Any
//!   integrand.
//! * boundary-focused: polar coordinates centred at a boundary point `xi`,
//!   `z = xi (1 - u e^{i phi})`. On the disk this is valid for any integrand
//!   and resolves singularities at `xi` down to the cutoff scale. On the ball
//!   the layout is reduced by unitary invariance and is only valid for
//!   integrands that depend on `<z, xi>` and `|z|` alone.
//! * Monte Carlo: uniform samples of the truncated domain.
//!
//! Results carry the difference between the given rule and a half-order rule
//! as error estimate.

use std::f64::consts::PI;

use num_complex::Complex64;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::{coords_string, factorial, inner, norm_sq, ModelDomain, Point};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    let mf = m as f64;
    for i in 0..m.div_ceil(2) {
        let mut t = (PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=m {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pm = if m == 1 { t } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = mf * (t * pm - pm1) / (t * t - 1.0);
            let dt = pm / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -t;
        x[m - 1 - i] = t;
        let wi = 2.0 / ((1.0 - t * t) * dp * dp);
        w[i] = wi;
        w[m - 1 - i] = wi;
    }
    (x, w)
}

/// Panels on `[a, b]` whose widths shrink geometrically (factor `q`) toward
/// `b`, the last one no wider than `min_width`.
pub fn panels_toward_end(a: f64, b: f64, q: f64, min_width: f64) -> Vec<(f64, f64)> {
    let len = b - a;
    let mut out = Vec::new();
    let mut lo = a;
    let mut w = len * (1.0 - q);
    let mut rest = len;
    while rest > min_width {
        out.push((lo, lo + w));
        lo += w;
        rest *= q;
        w = rest * (1.0 - q);
    }
    out.push((lo, b));
    out
}

pub fn panels_toward_start(a: f64, b: f64, q: f64, min_width: f64) -> Vec<(f64, f64)> {
    let len = b - a;
    let mut p: Vec<(f64, f64)> = panels_toward_end(0.0, len, q, min_width)
        .into_iter()
        .map(|(lo, hi)| (a + (len - hi), a + (len - lo)))
        .collect();
    p.reverse();
    p[0].0 = a;
    p.last_mut().unwrap().1 = b;
    p
}

/// Tensor Gauss nodes over a panel list: `(node, weight)` pairs.
pub fn panel_nodes(panels: &[(f64, f64)], order: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(order);
    let mut out = Vec::with_capacity(panels.len() * order);
    for &(lo, hi) in panels {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        for (xi, wi) in x.iter().zip(&w) {
            out.push((mid + half * xi, half * wi));
        }
    }
    out
}

/// Values that can be integrated: real or complex.
pub trait QuadValue:
    Copy + Zero + std::ops::Add<Output = Self> + std::ops::Mul<f64, Output = Self> + Send + Sync
{
    fn magnitude(&self) -> f64;
    fn finite(&self) -> bool;
}

impl QuadValue for f64 {
    fn magnitude(&self) -> f64 {
        self.abs()
    }
    fn finite(&self) -> bool {
        self.is_finite()
    }
}

impl QuadValue for Complex64 {
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Streaming pairwise summation with a fixed association order.
pub struct PairwiseSum<V> {
    block: V,
    in_block: usize,
    levels: Vec<Option<V>>,
}

const BLOCK: usize = 64;

impl<V: QuadValue> Default for PairwiseSum<V> {
    fn default() -> Self {
        Self::new()
    }
}

impl<V: QuadValue> PairwiseSum<V> {
    pub fn new() -> Self {
        PairwiseSum {
            block: V::zero(),
            in_block: 0,
            levels: Vec::new(),
        }
    }

    pub fn add(&mut self, v: V) {
        self.block = self.block + v;
        self.in_block += 1;
        if self.in_block == BLOCK {
            let mut carry = std::mem::replace(&mut self.block, V::zero());
            self.in_block = 0;
            for slot in self.levels.iter_mut() {
                match slot.take() {
                    Some(s) => carry = s + carry,
                    None => {
                        *slot = Some(carry);
                        return;
                    }
                }
            }
            self.levels.push(Some(carry));
        }
    }

    pub fn total(&self) -> V {
        let mut acc = self.block;
        for s in self.levels.iter().flatten() {
            acc = *s + acc;
        }
        acc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleKind {
    BoundaryRefinedPolar,
    TensorProduct,
    MonteCarlo,
}

/// Quadrature configuration.
///
/// `radial_nodes` is the Gauss order of each radial panel (and of every
/// panel of the focused layout); `angular_nodes` the trapezoid count per
/// angle. `boundary_cutoff` is the smallest resolved boundary scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureRule {
    pub kind: RuleKind,
    pub radial_nodes: usize,
    pub angular_nodes: usize,
    pub boundary_cutoff: f64,
    /// Geometric factor between consecutive graded panel widths.
    pub grading: f64,
    pub mc_samples: usize,
    pub seed: u64,
    #[serde(skip)]
    focus: Option<Vec<Complex64>>,
}

impl Default for QuadratureRule {
    fn default() -> Self {
        QuadratureRule {
            kind: RuleKind::BoundaryRefinedPolar,
            radial_nodes: 8,
            angular_nodes: 64,
            boundary_cutoff: 1e-10,
            grading: 0.25,
            mc_samples: 200_000,
            seed: 1,
            focus: None,
        }
    }
}

/// One quadrature node as seen by an integrand.
#[derive(Debug, Clone, Copy)]
pub struct NodeRef<'a> {
    pub z: &'a [Complex64],
    /// `1 - |z|`, computed without cancellation where the layout allows.
    pub delta: f64,
    /// `1 - <z, xi>` for the focus `xi` (first axis when unfocused).
    pub offset: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationResult<V> {
    pub value: V,
    pub error_estimate: f64,
    pub nodes_used: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Level {
    Fine,
    Coarse,
}

impl QuadratureRule {
    pub fn boundary_refined() -> Self {
        Self::default()
    }

    pub fn tensor_product() -> Self {
        QuadratureRule {
            kind: RuleKind::TensorProduct,
            radial_nodes: 24,
            angular_nodes: 48,
            ..Self::default()
        }
    }

    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        QuadratureRule {
            kind: RuleKind::MonteCarlo,
            mc_samples: samples,
            seed,
            boundary_cutoff: 1e-6,
            ..Self::default()
        }
    }

    pub fn with_nodes(mut self, radial: usize, angular: usize) -> Self {
        self.radial_nodes = radial;
        self.angular_nodes = angular;
        self
    }

    pub fn with_cutoff(mut self, cutoff: f64) -> Self {
        self.boundary_cutoff = cutoff;
        self
    }

    /// Same rule with doubled node counts.
    pub fn doubled(&self) -> Self {
        let mut r = self.clone();
        r.radial_nodes *= 2;
        r.angular_nodes *= 2;
        r.mc_samples *= 2;
        r
    }

    /// Focus the boundary-refined layout at the boundary point `dir/|dir|`.
    /// Ignored by the other kinds.
    pub fn focused(&self, dir: &[Complex64]) -> Self {
        let mut r = self.clone();
        let nrm = norm_sq(dir).sqrt();
        if self.kind == RuleKind::BoundaryRefinedPolar && nrm > 0.0 {
            r.focus = Some(dir.iter().map(|c| c / nrm).collect());
        } else {
            r.focus = None;
        }
        r
    }

    /// Focus at the boundary point behind `z`, when `z` is far enough from
    /// the origin for the focused layout to pay off.
    pub fn focused_near(&self, z: &Point) -> Self {
        if z.norm() >= 0.5 {
            self.focused(z.coords())
        } else {
            self.unfocused()
        }
    }

    pub fn unfocused(&self) -> Self {
        let mut r = self.clone();
        r.focus = None;
        r
    }

    pub fn focus(&self) -> Option<&[Complex64]> {
        self.focus.as_deref()
    }

    pub fn validate(&self) -> Result<()> {
        if self.radial_nodes < 8 {
            return Err(LabError::param("radial_nodes", "must be >= 8"));
        }
        if self.angular_nodes < 8 {
            return Err(LabError::param("angular_nodes", "must be >= 8"));
        }
        if !(self.boundary_cutoff > 0.0 && self.boundary_cutoff <= 1e-3) {
            return Err(LabError::param("boundary_cutoff", "must lie in (0, 1e-3]"));
        }
        if !(self.grading > 0.0 && self.grading < 1.0) {
            return Err(LabError::param("grading", "must lie in (0, 1)"));
        }
        if self.kind == RuleKind::MonteCarlo && self.mc_samples < 8 {
            return Err(LabError::param("mc_samples", "must be >= 8"));
        }
        Ok(())
    }

    fn check_focus(&self, domain: &ModelDomain) -> Result<()> {
        if let Some(f) = &self.focus {
            if f.len() != domain.dim() {
                return Err(LabError::DimensionMismatch {
                    expected: domain.dim(),
                    got: f.len(),
                });
            }
        }
        Ok(())
    }

    fn order(&self, level: Level) -> usize {
        match level {
            Level::Fine => self.radial_nodes,
            Level::Coarse => (self.radial_nodes / 2).max(2),
        }
    }

    fn angles(&self, level: Level) -> usize {
        match level {
            Level::Fine => self.angular_nodes,
            Level::Coarse => (self.angular_nodes / 2).max(2),
        }
    }

    /// Calls `visit(node, weight)` for every node of the given level.
    fn visit<F: FnMut(NodeRef<'_>, f64)>(&self, domain: &ModelDomain, level: Level, visit: F) {
        match (self.kind, &self.focus) {
            (RuleKind::MonteCarlo, _) => self.visit_monte_carlo(domain, visit),
            (RuleKind::BoundaryRefinedPolar, Some(xi)) if domain.dim() == 1 => {
                self.visit_focused_disk(xi[0], level, visit)
            }
            (RuleKind::BoundaryRefinedPolar, Some(xi)) => {
                self.visit_focused_ball(domain.dim(), xi, level, visit)
            }
            _ => self.visit_polar(domain.dim(), level, visit),
        }
    }

    fn radial_panels(&self) -> Vec<(f64, f64)> {
        let top = 1.0 - self.boundary_cutoff;
        match self.kind {
            RuleKind::TensorProduct => vec![(0.0, top)],
            _ => {
                let mut out = Vec::new();
                let mut lo = 0.0;
                let mut gap = self.grading;
                while gap > self.boundary_cutoff {
                    out.push((lo, 1.0 - gap));
                    lo = 1.0 - gap;
                    gap *= self.grading;
                }
                out.push((lo, top));
                out
            }
        }
    }

    fn visit_polar<F: FnMut(NodeRef<'_>, f64)>(&self, n: usize, level: Level, mut visit: F) {
        let m = self.order(level);
        let radial = panel_nodes(&self.radial_panels(), m);
        let na = self.angles(level);
        let dphi = 2.0 * PI / na as f64;
        let phases: Vec<Complex64> = (0..na)
            .map(|j| Complex64::from_polar(1.0, j as f64 * dphi))
            .collect();

        // hyperspherical nodes on the positive orthant of S^{n-1}:
        // (moduli x_k, weight prod x_k * prod sin^{n-1-k} chi_k)
        let chis = panel_nodes(&[(0.0, 0.5 * PI)], m);
        let mut sphere: Vec<(Vec<f64>, f64)> = vec![(vec![1.0], 1.0)];
        for k in 1..n {
            let mut next = Vec::with_capacity(sphere.len() * chis.len());
            for (mods, w) in &sphere {
                for &(chi, wc) in &chis {
                    // split the last modulus into (cos chi, sin chi) parts
                    let mut m2 = mods.clone();
                    let last = m2.pop().unwrap();
                    m2.push(last * chi.cos());
                    m2.push(last * chi.sin());
                    let jac = chi.sin().powi((n - 1 - k) as i32);
                    next.push((m2, w * wc * jac));
                }
            }
            sphere = next;
        }
        let sphere: Vec<(Vec<f64>, f64)> = sphere
            .into_iter()
            .map(|(mods, w)| {
                let prod: f64 = mods.iter().product();
                (mods, w * prod)
            })
            .collect();

        let total_angles = na.pow(n as u32);
        let mut z = vec![Complex64::zero(); n];
        let mut idx = vec![0usize; n];
        for &(rho, wr) in &radial {
            let wrho = wr * rho.powi(2 * n as i32 - 1);
            let one_minus_sq = (1.0 - rho) * (1.0 + rho);
            let delta = 1.0 - rho;
            let _ = one_minus_sq;
            for (mods, ws) in &sphere {
                let w0 = wrho * ws * dphi.powi(n as i32);
                for flat in 0..total_angles {
                    let mut f = flat;
                    for slot in idx.iter_mut() {
                        *slot = f % na;
                        f /= na;
                    }
                    for k in 0..n {
                        z[k] = phases[idx[k]] * (rho * mods[k]);
                    }
                    let offset = Complex64::new(1.0, 0.0) - z[0];
                    visit(NodeRef { z: &z, delta, offset }, w0);
                }
            }
        }
    }

    /// `z = xi (1 - u e^{i phi})`, `phi = +-(pi/2 - t)`, `u = 2 cos(phi) v`.
    fn focused_disk_nodes(&self, level: Level) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
        let m = self.order(level);
        let c = self.boundary_cutoff;
        let q = self.grading;
        let t_nodes = panel_nodes(&panels_toward_start(0.0, 0.5 * PI, q, c), m);
        let mut v_panels = panels_toward_start(0.0, 0.5, q, c);
        v_panels.extend(panels_toward_end(0.5, 1.0, q, c));
        (t_nodes, panel_nodes(&v_panels, m))
    }

    fn visit_focused_disk<F: FnMut(NodeRef<'_>, f64)>(&self, xi: Complex64, level: Level, mut visit: F) {
        let (t_nodes, v_nodes) = self.focused_disk_nodes(level);
        let mut z = [Complex64::zero()];
        for &(t, wt) in &t_nodes {
            let cphi = t.sin();
            for sign in [1.0, -1.0] {
                let e = Complex64::new(cphi, sign * t.cos());
                for &(v, wv) in &v_nodes {
                    let u = 2.0 * cphi * v;
                    let offset = e * u;
                    z[0] = xi * (Complex64::new(1.0, 0.0) - offset);
                    let one_minus_sq = 4.0 * cphi * cphi * v * (1.0 - v);
                    let delta = one_minus_sq / (1.0 + (1.0 - one_minus_sq).max(0.0).sqrt());
                    let w = wt * wv * 4.0 * cphi * cphi * v;
                    visit(NodeRef { z: &z, delta, offset }, w);
                }
            }
        }
    }

    /// Ball layout reduced by invariance under unitary maps fixing `xi`:
    /// `int F = pi^{n-1}/(n-2)! int_disk (1-|w|^2)^{n-1} int_0^1 F tau^{n-2} dtau dA(w)`
    /// with representative points `z = w xi + sqrt((1-|w|^2) tau) xi_perp`.
    fn visit_focused_ball<F: FnMut(NodeRef<'_>, f64)>(
        &self,
        n: usize,
        xi: &[Complex64],
        level: Level,
        mut visit: F,
    ) {
        let (t_nodes, v_nodes) = self.focused_disk_nodes(level);
        let m = self.order(level);
        let tau_nodes = panel_nodes(
            &panels_toward_end(0.0, 1.0, self.grading, self.boundary_cutoff),
            m,
        );
        let perp = orthogonal_unit(xi);
        let c_n = PI.powi(n as i32 - 1) / factorial(n - 2);
        let mut z = vec![Complex64::zero(); n];
        for &(t, wt) in &t_nodes {
            let cphi = t.sin();
            for sign in [1.0, -1.0] {
                let e = Complex64::new(cphi, sign * t.cos());
                for &(v, wv) in &v_nodes {
                    let u = 2.0 * cphi * v;
                    let offset = e * u;
                    let w1 = Complex64::new(1.0, 0.0) - offset;
                    let s1 = 4.0 * cphi * cphi * v * (1.0 - v); // 1 - |w1|^2
                    let wdisk = wt * wv * 4.0 * cphi * cphi * v * c_n * s1.powi(n as i32 - 1);
                    for &(tau, wtau) in &tau_nodes {
                        let radial = (s1 * tau).sqrt();
                        for k in 0..n {
                            z[k] = xi[k] * w1 + perp[k] * radial;
                        }
                        let one_minus_sq = s1 * (1.0 - tau);
                        let delta = one_minus_sq / (1.0 + (1.0 - one_minus_sq).max(0.0).sqrt());
                        let w = wdisk * wtau * tau.powi(n as i32 - 2);
                        visit(NodeRef { z: &z, delta, offset }, w);
                    }
                }
            }
        }
    }

    fn visit_monte_carlo<F: FnMut(NodeRef<'_>, f64)>(&self, domain: &ModelDomain, mut visit: F) {
        let n = domain.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let w = domain.volume() / self.mc_samples as f64;
        let top = 1.0 - self.boundary_cutoff;
        let mut z = vec![Complex64::zero(); n];
        let mut drawn = 0;
        while drawn < self.mc_samples {
            for c in z.iter_mut() {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *c = Complex64::new(re, im);
            }
            let nrm = norm_sq(&z).sqrt();
            let u: f64 = rng.random();
            let rho = u.powf(1.0 / (2 * n) as f64);
            if rho >= top {
                continue;
            }
            for c in z.iter_mut() {
                *c *= rho / nrm;
            }
            drawn += 1;
            let offset = Complex64::new(1.0, 0.0) - z[0];
            visit(NodeRef { z: &z, delta: 1.0 - rho, offset }, w);
        }
    }
}

/// A unit vector orthogonal to `xi` (unit, `n >= 2`).
fn orthogonal_unit(xi: &[Complex64]) -> Vec<Complex64> {
    let n = xi.len();
    // pick the basis vector least aligned with xi
    let k = (0..n)
        .min_by(|&a, &b| xi[a].norm().partial_cmp(&xi[b].norm()).unwrap())
        .unwrap();
    let mut e = vec![Complex64::zero(); n];
    e[k] = Complex64::new(1.0, 0.0);
    let proj = inner(&e, xi);
    let mut v: Vec<Complex64> = e.iter().zip(xi).map(|(a, b)| a - b * proj).collect();
    let nrm = norm_sq(&v).sqrt();
    v.iter_mut().for_each(|c| *c /= nrm);
    v
}

fn run_level<V, F>(
    domain: &ModelDomain,
    rule: &QuadratureRule,
    level: Level,
    integrand: &F,
) -> Result<(V, usize, Vec<V>)>
where
    V: QuadValue,
    F: Fn(NodeRef<'_>) -> V,
{
    let mut sum = PairwiseSum::new();
    let mut count = 0usize;
    let mut bad: Option<LabError> = None;
    // Monte Carlo keeps weighted samples for the standard error
    let keep = rule.kind == RuleKind::MonteCarlo;
    let mut samples = Vec::new();
    rule.visit(domain, level, |node, w| {
        if bad.is_some() {
            return;
        }
        let v = integrand(node);
        if !v.finite() {
            bad = Some(LabError::NonFiniteIntegrand {
                index: count,
                coords: coords_string(node.z),
            });
            return;
        }
        sum.add(v * w);
        if keep {
            samples.push(v);
        }
        count += 1;
    });
    if let Some(e) = bad {
        return Err(e);
    }
    Ok((sum.total(), count, samples))
}

/// Integrates `integrand` over `domain` with `rule`.
pub fn integrate<V, F>(domain: &ModelDomain, integrand: F, rule: &QuadratureRule) -> Result<IntegrationResult<V>>
where
    V: QuadValue,
    F: Fn(NodeRef<'_>) -> V,
{
    rule.validate()?;
    rule.check_focus(domain)?;
    let (fine, count, samples) = run_level(domain, rule, Level::Fine, &integrand)?;
    let error_estimate = if rule.kind == RuleKind::MonteCarlo {
        let nf = samples.len() as f64;
        let mean = fine * (1.0 / domain.volume());
        let var: f64 = samples
            .iter()
            .map(|v| {
                let d = *v + mean * -1.0;
                d.magnitude().powi(2)
            })
            .sum::<f64>()
            / (nf - 1.0);
        domain.volume() * (var / nf).sqrt()
    } else {
        let (coarse, _, _) = run_level(domain, rule, Level::Coarse, &integrand)?;
        (fine + coarse * -1.0).magnitude()
    };
    Ok(IntegrationResult {
        value: fine,
        error_estimate,
        nodes_used: count,
    })
}

/// Value only, fine level: for inner integrals of nested quadratures.
pub fn integrate_value<V, F>(domain: &ModelDomain, integrand: F, rule: &QuadratureRule) -> Result<V>
where
    V: QuadValue,
    F: Fn(NodeRef<'_>) -> V,
{
    rule.validate()?;
    rule.check_focus(domain)?;
    Ok(run_level(domain, rule, Level::Fine, &integrand)?.0)
}

/// One converged integral per path point. `focus_on_point` focuses the
/// boundary-refined layout behind each `z0` (see [`QuadratureRule::focused_near`]).
pub fn integrate_to_boundary_profile<V, G, F>(
    domain: &ModelDomain,
    rule: &QuadratureRule,
    path: &[Point],
    focus_on_point: bool,
    family: G,
) -> Result<Vec<(f64, IntegrationResult<V>)>>
where
    V: QuadValue,
    G: Fn(&Point) -> F,
    F: Fn(NodeRef<'_>) -> V,
{
    check_path(path)?;
    path.iter()
        .map(|z0| {
            let r = if focus_on_point { rule.focused_near(z0) } else { rule.unfocused() };
            integrate(domain, family(z0), &r)
                .map(|res| (z0.delta(), res))
                .map_err(|e| LabError::ProfilePoint {
                    z0: z0.to_string(),
                    source: Box::new(e),
                })
        })
        .collect()
}

/// Paths must approach the boundary: strictly decreasing `delta`.
pub fn check_path(path: &[Point]) -> Result<()> {
    if path.is_empty() {
        return Err(LabError::param("path", "empty"));
    }
    for w in path.windows(2) {
        if !(w[1].delta() < w[0].delta()) {
            return Err(LabError::param("path", "boundary distance must strictly decrease"));
        }
    }
    Ok(())
}

/// Default boundary path `z0 = (1 - 2^{-j}) e_1`, `j = 4..=17`, keeping only
/// points with `delta >= 1000 * cutoff`.
pub fn default_path(domain: &ModelDomain, cutoff: f64) -> Vec<Point> {
    (4..=17)
        .map(|j| 2f64.powi(-j))
        .filter(|d| *d >= 1e3 * cutoff)
        .map(|d| domain.point_on_axis(1.0 - d).expect("path point is admissible"))
        .collect()
}

/// Geometric path `delta = hi, ..., lo` with `count` points along `dir`.
pub fn geometric_path(domain: &ModelDomain, hi: f64, lo: f64, count: usize) -> Result<Vec<Point>> {
    if count < 2 || !(lo > 0.0 && hi > lo && hi <= 1.0) {
        return Err(LabError::param("path", "need 0 < lo < hi <= 1 and count >= 2"));
    }
    (0..count)
        .map(|i| {
            let d = hi * (lo / hi).powf(i as f64 / (count - 1) as f64);
            domain.point_on_axis(1.0 - d)
        })
        .collect()
}

/// 1-D graded Gauss rule on `[0, 1]`, refined toward `1` down to `min_width`.
pub fn graded_unit_interval(order: usize, q: f64, min_width: f64) -> Vec<(f64, f64)> {
    panel_nodes(&panels_toward_end(0.0, 1.0, q, min_width), order)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk() -> ModelDomain {
        ModelDomain::disk()
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for m in [1usize, 2, 5, 8, 16, 33] {
            let (x, w) = gauss_legendre(m);
            for deg in 0..(2 * m) {
                let got: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((got - exact).abs() < 1e-13, "m={m} deg={deg}");
            }
        }
    }

    #[test]
    fn panels_cover_interval() {
        let p = panels_toward_end(0.0, 1.0, 0.25, 1e-10);
        assert_eq!(p[0].0, 0.0);
        assert_eq!(p.last().unwrap().1, 1.0);
        assert!(p.last().unwrap().1 - p.last().unwrap().0 <= 1e-10);
        for w in p.windows(2) {
            assert!((w[0].1 - w[1].0).abs() < 1e-15);
        }
        let p = panels_toward_start(0.0, 0.5, 0.25, 1e-10);
        assert_eq!(p[0].0, 0.0);
        assert!((p.last().unwrap().1 - 0.5).abs() < 1e-15);
        assert!(p[0].1 <= 1e-10);
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let mut s = PairwiseSum::new();
        let mut naive = 0.0;
        for i in 0..10_000 {
            let v = 1.0 / (1.0 + i as f64);
            s.add(v);
            naive += v;
        }
        assert!((s.total() - naive).abs() < 1e-11);
    }

    #[test]
    fn area_of_disk() {
        for rule in [
            QuadratureRule::boundary_refined(),
            QuadratureRule::boundary_refined().focused(&[Complex64::new(0.0, 1.0)]),
            QuadratureRule::tensor_product(),
        ] {
            let r = integrate(&disk(), |_| 1.0, &rule).unwrap();
            assert!((r.value - PI).abs() < 1e-8, "{:?}: {}", rule.kind, r.value);
        }
    }

    #[test]
    fn moment_of_boundary_distance() {
        let r = integrate(&disk(), |n| n.delta, &QuadratureRule::boundary_refined()).unwrap();
        assert!((r.value - PI / 3.0).abs() < 1e-9);
        let f = QuadratureRule::boundary_refined().focused(&[Complex64::new(1.0, 0.0)]);
        // |z| has a cone point at the origin, a panel corner of this layout
        let r = integrate(&disk(), |n| n.delta, &f).unwrap();
        assert!((r.value - PI / 3.0).abs() < 1e-5, "{}", r.value);
    }

    #[test]
    fn rotational_symmetry() {
        let r: IntegrationResult<Complex64> =
            integrate(&disk(), |n| n.z[0], &QuadratureRule::boundary_refined()).unwrap();
        assert!(r.value.norm() < 1e-12);
        let r: IntegrationResult<Complex64> = integrate(
            &disk(),
            |n| n.z[0],
            &QuadratureRule::boundary_refined().focused(&[Complex64::new(1.0, 0.0)]),
        )
        .unwrap();
        assert!(r.value.norm() < 1e-8);
    }

    #[test]
    fn ball_volumes() {
        for n in [2usize, 3] {
            let b = ModelDomain::ball(n).unwrap();
            let rule = QuadratureRule::tensor_product().with_nodes(8, 8);
            let r = integrate(&b, |_| 1.0, &rule).unwrap();
            assert!((r.value - b.volume()).abs() < 1e-8, "n={n}");
        }
        let b = ModelDomain::ball(2).unwrap();
        let axis = b.axis();
        let f = QuadratureRule::boundary_refined().focused(&axis);
        let r = integrate(&b, |_| 1.0, &f).unwrap();
        assert!((r.value - b.volume()).abs() < 1e-8);
        // |z|^2 moment: n/(n+1) * vol
        let r = integrate(&b, |nd| norm_sq(nd.z), &f).unwrap();
        assert!((r.value - b.volume() * 2.0 / 3.0).abs() < 1e-8);
        // zonal function of z_1: int |z_1|^2 = vol / (n+1)
        let r = integrate(&b, |nd| nd.z[0].norm_sqr(), &f).unwrap();
        assert!((r.value - b.volume() / 3.0).abs() < 1e-8);
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let err = integrate(&disk(), |n| if n.z[0].re > 0.5 { f64::NAN } else { 1.0 }, &QuadratureRule::default())
            .unwrap_err();
        assert!(matches!(err, LabError::NonFiniteIntegrand { .. }));
    }

    #[test]
    fn invalid_rules_rejected() {
        assert!(integrate(&disk(), |_| 1.0, &QuadratureRule::default().with_nodes(4, 64)).is_err());
        assert!(integrate(&disk(), |_| 1.0, &QuadratureRule::default().with_cutoff(0.1)).is_err());
    }

    #[test]
    fn monte_carlo_agrees_with_polar_and_is_reproducible() {
        let f = |n: NodeRef<'_>| (1.0 + n.z[0].re).powi(2) * n.delta.sqrt();
        let det = integrate(&disk(), f, &QuadratureRule::boundary_refined()).unwrap();
        let mc_rule = QuadratureRule::monte_carlo(200_000, 42);
        let mc = integrate(&disk(), f, &mc_rule).unwrap();
        assert!((mc.value - det.value).abs() <= 3.0 * (mc.error_estimate + det.error_estimate));
        let again = integrate(&disk(), f, &mc_rule).unwrap();
        assert_eq!(mc.value.to_bits(), again.value.to_bits());

        let b = ModelDomain::ball(2).unwrap();
        let g = |n: NodeRef<'_>| 1.0 + n.z[1].norm_sqr() + n.z[0].re;
        let det = integrate(&b, g, &QuadratureRule::tensor_product().with_nodes(8, 8)).unwrap();
        let mc = integrate(&b, g, &QuadratureRule::monte_carlo(200_000, 9)).unwrap();
        assert!((mc.value - det.value).abs() <= 3.0 * (mc.error_estimate + det.error_estimate));
    }

    #[test]
    fn profile_requires_decreasing_path() {
        let d = disk();
        let path = vec![d.point_on_axis(0.9).unwrap(), d.point_on_axis(0.5).unwrap()];
        let res = integrate_to_boundary_profile(&d, &QuadratureRule::default(), &path, true, |_| |_: NodeRef<'_>| 1.0);
        assert!(res.is_err());
    }

    #[test]
    fn constant_and_independent_profiles() {
        let d = disk();
        let path = default_path(&d, 1e-10);
        assert_eq!(path.len(), 14);
        let prof = integrate_to_boundary_profile(&d, &QuadratureRule::default(), &path, true, |_| {
            |_: NodeRef<'_>| 1.0
        })
        .unwrap();
        for (_, r) in &prof {
            assert!((r.value - PI).abs() < 1e-8);
        }
        let prof = integrate_to_boundary_profile(&d, &QuadratureRule::default(), &path, false, |_| {
            |n: NodeRef<'_>| n.delta.powi(3)
        })
        .unwrap();
        // 2 pi int (1-r)^3 r dr = 2 pi / 20
        for (_, r) in &prof {
            assert!((r.value - PI / 10.0).abs() < 1e-10);
        }
    }
}
