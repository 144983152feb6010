//! Bergman kernel of the disk and the ball, normalized kernels and the
//! weighted norms `||K(., z0)||_{p, beta}`.
//!
//! `K(z, w) = n!/pi^n (1 - <z, w>)^{-(n+1)}`. Near the boundary `|K|` reaches
//! `1e12` and beyond, so powers are taken through `p log|K|`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::{factorial, inner, norm_sq, ModelDomain, Point};
use crate::quadrature::{check_path, integrate, IntegrationResult, NodeRef, QuadratureRule};

pub type KernelValue = Complex64;

/// `n!/pi^n`, the value of `K(0, 0)`.
pub fn kernel_constant(n: usize) -> f64 {
    factorial(n) / PI.powi(n as i32)
}

/// Kernel from `c = 1 - <z, w>`.
pub fn kernel_from_offset(n: usize, c: Complex64) -> Complex64 {
    kernel_constant(n) * c.powi(-((n + 1) as i32))
}

/// `log |K|` from `c = 1 - <z, w>`.
pub fn log_abs_kernel(n: usize, c: Complex64) -> f64 {
    kernel_constant(n).ln() - (n + 1) as f64 * c.norm().ln()
}

pub fn kernel_raw(z: &[Complex64], w: &[Complex64]) -> Complex64 {
    kernel_from_offset(z.len(), Complex64::new(1.0, 0.0) - inner(z, w))
}

pub fn kernel(domain: &ModelDomain, z: &Point, w: &Point) -> Result<KernelValue> {
    domain.check(z)?;
    domain.check(w)?;
    Ok(kernel_raw(z.coords(), w.coords()))
}

/// `K(z, z) = n!/pi^n (1 - |z|^2)^{-(n+1)}`.
pub fn kernel_diagonal(domain: &ModelDomain, z: &Point) -> Result<f64> {
    domain.check(z)?;
    Ok(diagonal_raw(z))
}

fn diagonal_raw(z: &Point) -> f64 {
    let d = z.delta();
    let s = d * (2.0 - d);
    kernel_constant(z.dim()) * s.powi(-(z.dim() as i32 + 1))
}

/// `k_{z0}(z) = K(z, z0) / sqrt(K(z0, z0))`.
pub fn normalized_kernel(domain: &ModelDomain, z0: &Point, z: &Point) -> Result<KernelValue> {
    Ok(kernel(domain, z, z0)? / diagonal_raw(z0).sqrt())
}

/// Returns `c(node) = 1 - <node, z0>` for the nodes of `rule`. On layouts
/// focused at `z0/|z0|` this is `delta(z0) + |z0| offset`, free of
/// cancellation at the boundary.
pub(crate) fn offset_map<'a>(
    rule: &QuadratureRule,
    z0: &'a [Complex64],
) -> impl Fn(&NodeRef<'_>) -> Complex64 + 'a {
    let r = norm_sq(z0).sqrt();
    let d0 = 1.0 - r;
    let focused_here = match rule.focus() {
        Some(xi) if r > 0.0 => {
            let al = inner(z0, xi);
            (al.re - r).abs() < 1e-12 * r.max(1.0) && al.im.abs() < 1e-12
        }
        _ => false,
    };
    move |node: &NodeRef<'_>| {
        if focused_here {
            node.offset * r + d0
        } else {
            Complex64::new(1.0, 0.0) - inner(node.z, z0)
        }
    }
}

/// Exponent `p` in `[1, inf]` and weight `beta` (`> -1` for finite `p`,
/// `>= 0` for `p = inf`) at a base point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedNormRequest {
    pub p: f64,
    pub beta: f64,
    pub z0: Point,
}

impl WeightedNormRequest {
    pub fn new(p: f64, beta: f64, z0: Point) -> Result<Self> {
        let r = WeightedNormRequest { p, beta, z0 };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0) {
            return Err(LabError::param("p", format!("must lie in [1, inf], got {}", self.p)));
        }
        if self.p.is_infinite() {
            if !(self.beta >= 0.0 && self.beta.is_finite()) {
                return Err(LabError::param("beta", "must be >= 0 for p = inf"));
            }
        } else if !(self.beta > -1.0 && self.beta.is_finite()) {
            return Err(LabError::param("beta", "must be > -1 for finite p"));
        }
        Ok(())
    }

    /// Conjugate exponent `p' = p/(p-1)`.
    pub fn conjugate(&self) -> f64 {
        if self.p == 1.0 {
            f64::INFINITY
        } else if self.p.is_infinite() {
            1.0
        } else {
            self.p / (self.p - 1.0)
        }
    }
}

/// `int |K(z, z0)|^p delta(z)^beta dnu(z)` on the rule focused behind `z0`.
pub fn kernel_moment(
    domain: &ModelDomain,
    p: f64,
    beta: f64,
    z0: &Point,
    rule: &QuadratureRule,
) -> Result<IntegrationResult<f64>> {
    WeightedNormRequest::new(p, beta, z0.clone())?;
    if p.is_infinite() {
        return Err(LabError::param("p", "moments need finite p"));
    }
    domain.check(z0)?;
    let n = domain.dim();
    let rule = rule.focused_near(z0);
    let off = offset_map(&rule, z0.coords());
    integrate(
        domain,
        |node| {
            let mut e = p * log_abs_kernel(n, off(&node));
            if beta != 0.0 {
                e += beta * node.delta.ln();
            }
            e.exp()
        },
        &rule,
    )
}

/// `||K(., z0)||_{p, beta}`: the `1/p`-th power of [`kernel_moment`] for
/// finite `p`, the weighted supremum for `p = inf`.
pub fn weighted_kernel_norm(
    domain: &ModelDomain,
    request: &WeightedNormRequest,
    rule: &QuadratureRule,
) -> Result<f64> {
    request.validate()?;
    if request.p.is_infinite() {
        return weighted_sup(domain, request.beta, &request.z0, rule);
    }
    let m = kernel_moment(domain, request.p, request.beta, &request.z0, rule)?;
    Ok(m.value.powf(1.0 / request.p))
}

/// `sup_z |K(z, z0)| delta(z)^beta` over the boundary-refined nodes and the
/// critical point of the ray through `z0`.
fn weighted_sup(domain: &ModelDomain, beta: f64, z0: &Point, rule: &QuadratureRule) -> Result<f64> {
    domain.check(z0)?;
    let n = domain.dim();
    let np1 = (n + 1) as f64;
    let x = z0.norm();
    let d0 = z0.delta();
    // along the ray z = t z0/|z0|: (1-t)^beta (1 - x t)^{-(n+1)}
    let ray = |t: f64| -> f64 {
        let one_minus_xt = d0 + x * (1.0 - t);
        kernel_constant(n).ln() + beta * (1.0 - t).ln() - np1 * one_minus_xt.ln()
    };
    let mut best = ray(0.0);
    if beta < np1 && x > 0.0 {
        // d/dt = 0: t* = ((n+1)x - beta) / (x (n+1-beta)), or 1 - t* in closed form
        let one_minus_t = beta * d0 / (x * (np1 - beta));
        if one_minus_t > 0.0 && one_minus_t < 1.0 {
            best = best.max(ray(1.0 - one_minus_t));
        } else if one_minus_t == 0.0 {
            // beta = 0: sup at the boundary point behind z0
            best = best.max(kernel_constant(n).ln() - np1 * d0.ln());
        }
    }
    let mut r = rule.focused_near(z0);
    r.kind = crate::quadrature::RuleKind::BoundaryRefinedPolar;
    let off = offset_map(&r, z0.coords());
    let cell = std::cell::Cell::new(best);
    integrate(
        domain,
        |node| {
            let mut e = log_abs_kernel(n, off(&node));
            if beta != 0.0 {
                e += beta * node.delta.ln();
            }
            if e > cell.get() {
                cell.set(e);
            }
            0.0
        },
        &r,
    )?;
    Ok(cell.get().exp())
}

/// `(delta(z0), ||K(., z0)||_{inf, beta})` along `path`.
pub fn sup_norm_profile(
    domain: &ModelDomain,
    beta: f64,
    path: &[Point],
    rule: &QuadratureRule,
) -> Result<Vec<(f64, f64)>> {
    check_path(path)?;
    path.iter()
        .map(|z0| {
            let req = WeightedNormRequest::new(f64::INFINITY, beta, z0.clone())?;
            Ok((z0.delta(), weighted_kernel_norm(domain, &req, rule)?))
        })
        .collect()
}

/// `(delta(z0), int |K(., z0)|^p delta^beta dnu)` along `path`.
pub fn kernel_moment_profile(
    domain: &ModelDomain,
    p: f64,
    beta: f64,
    path: &[Point],
    rule: &QuadratureRule,
) -> Result<Vec<(f64, f64)>> {
    check_path(path)?;
    path.iter()
        .map(|z0| {
            kernel_moment(domain, p, beta, z0, rule)
                .map(|m| (z0.delta(), m.value))
                .map_err(|e| LabError::ProfilePoint {
                    z0: z0.to_string(),
                    source: Box::new(e),
                })
        })
        .collect()
}

/// `||k_{z0}||_2`.
pub fn normalized_kernel_norm(domain: &ModelDomain, z0: &Point, rule: &QuadratureRule) -> Result<f64> {
    let m = kernel_moment(domain, 2.0, 0.0, z0, rule)?;
    Ok((m.value / diagonal_raw(z0)).sqrt())
}

/// A holomorphic polynomial `sum c_a z^a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub terms: Vec<(Complex64, Vec<u32>)>,
}

impl Polynomial {
    pub fn constant(n: usize, c: f64) -> Self {
        Polynomial {
            terms: vec![(Complex64::new(c, 0.0), vec![0; n])],
        }
    }

    pub fn monomial(exponents: Vec<u32>) -> Self {
        Polynomial {
            terms: vec![(Complex64::new(1.0, 0.0), exponents)],
        }
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|(_, a)| a.iter().sum()).max().unwrap_or(0)
    }

    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        self.terms
            .iter()
            .map(|(c, a)| {
                a.iter()
                    .zip(z)
                    .fold(*c, |acc, (&k, zk)| acc * zk.powu(k))
            })
            .sum()
    }
}

/// `|int K(z, w) f(w) dnu(w) - f(z)|`.
pub fn reproduce_check(
    domain: &ModelDomain,
    f: &Polynomial,
    z: &Point,
    rule: &QuadratureRule,
) -> Result<f64> {
    domain.check(z)?;
    if f.terms.iter().any(|(_, a)| a.len() != domain.dim()) {
        return Err(LabError::DimensionMismatch {
            expected: domain.dim(),
            got: f.terms.first().map(|t| t.1.len()).unwrap_or(0),
        });
    }
    let zc = z.coords();
    let got = integrate(
        domain,
        |node| kernel_raw(zc, node.z) * f.eval(node.z),
        &rule.unfocused(),
    )?;
    Ok((got.value - f.eval(zc)).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn values_at_origin() {
        let d = ModelDomain::disk();
        let k = kernel(&d, &d.origin(), &d.origin()).unwrap();
        assert!((k.re - 1.0 / PI).abs() < 1e-15 && k.im == 0.0);
        let b = ModelDomain::ball(2).unwrap();
        let k = kernel(&b, &b.origin(), &b.origin()).unwrap();
        assert!((k.re - 2.0 / (PI * PI)).abs() < 1e-15);
    }

    #[test]
    fn hermitian_and_positive_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=3 {
            let d = if n == 1 { ModelDomain::disk() } else { ModelDomain::ball(n).unwrap() };
            for _ in 0..1000 {
                let mut pt = || loop {
                    let v: Vec<Complex64> = (0..n)
                        .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                        .collect();
                    if let Ok(p) = d.point(v) {
                        return p;
                    }
                };
                let (z, w) = (pt(), pt());
                let a = kernel(&d, &z, &w).unwrap();
                let b = kernel(&d, &w, &z).unwrap();
                assert!((a - b.conj()).norm() <= 1e-12 * a.norm());
                let kz = kernel(&d, &z, &z).unwrap();
                assert!(kz.re > 0.0 && kz.im.abs() <= 1e-12 * kz.re);
                let diag = kernel_diagonal(&d, &z).unwrap();
                assert!((kz.re - diag).abs() <= 1e-9 * diag);
            }
        }
    }

    #[test]
    fn normalized_kernel_examples() {
        let d = ModelDomain::disk();
        let o = d.origin();
        for z in [c(0.3, 0.1), c(-0.9, 0.0), c(0.0, 0.99)] {
            let v = normalized_kernel(&d, &o, &Point::disk(z).unwrap()).unwrap();
            assert!((v - c(1.0 / PI.sqrt(), 0.0)).norm() < 1e-14);
        }
        let z0 = Point::disk(c(0.6, -0.2)).unwrap();
        let v = normalized_kernel(&d, &z0, &z0).unwrap();
        assert!((v.re - kernel_diagonal(&d, &z0).unwrap().sqrt()).abs() < 1e-12 && v.im.abs() < 1e-12);
    }

    #[test]
    fn normalized_kernel_has_unit_norm() {
        let d = ModelDomain::disk();
        let rule = QuadratureRule::default();
        for z in [c(0.0, 0.0), c(0.9, 0.0), Complex64::from_polar(0.999, PI / 7.0)] {
            let z0 = Point::disk(z).unwrap();
            let nrm = normalized_kernel_norm(&d, &z0, &rule).unwrap();
            assert!((nrm - 1.0).abs() < 1e-4, "{z}: {nrm}");
        }
        let b = ModelDomain::ball(2).unwrap();
        for x in [0.0, 0.9, 0.999] {
            let nrm = normalized_kernel_norm(&b, &b.point_on_axis(x).unwrap(), &rule).unwrap();
            assert!((nrm - 1.0).abs() < 1e-4, "{x}: {nrm}");
        }
    }

    #[test]
    fn l2_norm_is_root_of_diagonal() {
        let d = ModelDomain::disk();
        let z0 = d.point_on_axis(0.9).unwrap();
        let req = WeightedNormRequest::new(2.0, 0.0, z0).unwrap();
        let v = weighted_kernel_norm(&d, &req, &QuadratureRule::default()).unwrap();
        let exact = 1.0 / (PI.sqrt() * (1.0 - 0.81));
        assert!((v - exact).abs() < 1e-6 * exact, "{v}");
        assert!((exact - 2.969).abs() < 1e-3);
    }

    #[test]
    fn moments_match_closed_forms() {
        // int |1 - x z|^{-2} dA = pi sum x^{2k}/(k+1) = -pi ln(1-x^2)/x^2
        let d = ModelDomain::disk();
        let rule = QuadratureRule::default();
        for x in [0.5f64, 0.99, 0.9999] {
            let z0 = d.point_on_axis(x).unwrap();
            let m = kernel_moment(&d, 1.0, 0.0, &z0, &rule).unwrap();
            let exact = -(1.0 - x * x).ln() / (x * x);
            assert!((m.value - exact).abs() < 1e-7 * exact, "x={x}: {} vs {exact}", m.value);
            // the half-order estimate is conservative
            assert!(m.error_estimate >= (m.value - exact).abs() && m.error_estimate < 1e-3 * exact);
        }
    }

    #[test]
    fn request_validation() {
        let z0 = ModelDomain::disk().origin();
        assert!(WeightedNormRequest::new(0.5, 0.0, z0.clone()).is_err());
        assert!(WeightedNormRequest::new(2.0, -1.0, z0.clone()).is_err());
        assert!(WeightedNormRequest::new(f64::INFINITY, -0.5, z0.clone()).is_err());
        let r = WeightedNormRequest::new(3.0, -0.5, z0).unwrap();
        assert!((r.conjugate() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn sup_norm_on_ray() {
        let d = ModelDomain::disk();
        let rule = QuadratureRule::default();
        let z0 = d.point_on_axis(0.99).unwrap();
        // beta = 0: sup at the boundary behind z0, (1/pi) (1-x)^{-2}
        let req = WeightedNormRequest::new(f64::INFINITY, 0.0, z0.clone()).unwrap();
        let v = weighted_kernel_norm(&d, &req, &rule).unwrap();
        assert!((v - 1e4 / PI).abs() < 1e-9 * v);
        // beta >= n+1: max at the origin, value 1/pi
        let req = WeightedNormRequest::new(f64::INFINITY, 2.5, z0).unwrap();
        let v = weighted_kernel_norm(&d, &req, &rule).unwrap();
        assert!((v - 1.0 / PI).abs() < 1e-12);
    }

    #[test]
    fn sup_profile_slopes() {
        let d = ModelDomain::disk();
        let path = crate::quadrature::geometric_path(&d, 1e-2, 1e-5, 7).unwrap();
        for (beta, expect) in [(0.0, -2.0), (1.0, -1.0), (2.0, 0.0)] {
            let prof = sup_norm_profile(&d, beta, &path, &QuadratureRule::default()).unwrap();
            let (a, b) = (prof[0], prof[prof.len() - 1]);
            let slope = (b.1.ln() - a.1.ln()) / (b.0.ln() - a.0.ln());
            assert!((slope - expect).abs() < 0.05, "beta={beta}: {slope}");
        }
    }

    #[test]
    fn reproducing_property() {
        let d = ModelDomain::disk();
        let rule = QuadratureRule::default();
        let r = reproduce_check(&d, &Polynomial::constant(1, 1.0), &d.origin(), &rule).unwrap();
        assert!(r <= 1e-8, "{r}");
        let f = Polynomial::monomial(vec![3]);
        let z = d.point_on_axis(0.5).unwrap();
        assert!((f.eval(z.coords()).re - 0.125).abs() < 1e-15);
        let r = reproduce_check(&d, &f, &z, &rule).unwrap();
        assert!(r <= 1e-6, "{r}");
        let b = ModelDomain::ball(2).unwrap();
        let z = b.point(vec![c(0.3, 0.0), c(0.0, 0.4)]).unwrap();
        let r = reproduce_check(&b, &Polynomial::monomial(vec![1, 1]), &z, &rule).unwrap();
        assert!(r <= 1e-6, "{r}");
        for deg in 0..=8u32 {
            let f = Polynomial::monomial(vec![deg, 8 - deg]);
            let r = reproduce_check(&b, &f, &z, &rule).unwrap();
            assert!(r <= 1e-6 * (1.0 + f.eval(z.coords()).norm()), "deg {deg}: {r}");
        }
    }
}
