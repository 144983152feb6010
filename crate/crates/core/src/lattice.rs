//! r-lattices: centres `a_k` whose balls `B(a_k, r)` cover the domain while
//! the enlarged balls `B(a_k, R)`, `R = (1+r)/2`, overlap at most `m` times.
//!
//! Only `{delta >= delta_min}` is represented.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::{check_radius, disk_ball_euclidean, norm_sq, pseudo_distance, ModelDomain, Point};

pub const SEPARATION_CAP: f64 = 0.6;

/// Minimum number of validation samples.
pub const MIN_VALIDATION_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RLattice {
    pub domain: ModelDomain,
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub delta_min: f64,
    /// Empirical overlap bound at radius `R`, once validated.
    pub multiplicity: Option<usize>,
    pub centers: Vec<Point>,
}

impl RLattice {
    pub fn from_centers(domain: ModelDomain, r: f64, delta_min: f64, centers: Vec<Point>) -> Result<Self> {
        check_radius(r)?;
        for c in &centers {
            domain.check(c)?;
        }
        Ok(RLattice {
            domain,
            r,
            big_r: 0.5 * (1.0 + r),
            delta_min,
            multiplicity: None,
            centers,
        })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn smallest_delta(&self) -> f64 {
        self.centers.iter().map(|c| c.delta()).fold(f64::INFINITY, f64::min)
    }

    pub fn index(&self) -> CenterIndex {
        let mut idx = CenterIndex::new(self.domain.dim());
        for c in &self.centers {
            idx.insert(c.coords().to_vec());
        }
        idx
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| LabError::Io(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let l: RLattice = serde_json::from_str(s).map_err(|e| LabError::Config(format!("lattice json: {e}")))?;
        let mut out = RLattice::from_centers(l.domain, l.r, l.delta_min, l.centers)?;
        out.multiplicity = l.multiplicity;
        Ok(out)
    }
}

/// Kobayashi radius of the shell through `z`.
fn shell_radius(z: &[Complex64]) -> f64 {
    norm_sq(z).sqrt().min(1.0 - 1e-16).atanh()
}

/// Bucketed centre set for pseudohyperbolic range queries. Buckets are
/// Kobayashi shells of width `BIN`, cut into angular sectors on the disk and
/// into Euclidean grid cells on the ball.
#[derive(Debug, Clone)]
pub struct CenterIndex {
    n: usize,
    points: Vec<Vec<Complex64>>,
    buckets: HashMap<(i64, i64), Vec<usize>>,
    // n >= 2: shell plus Euclidean grid cell of the coordinates
    cells: HashMap<Vec<i64>, Vec<usize>>,
}

const BIN: f64 = 0.25;

fn sectors(shell: i64) -> i64 {
    // sector width ~ BIN in hyperbolic arc length at the outer radius
    let s = (shell + 1) as f64 * BIN;
    let count = (PI * (2.0 * s).sinh() / BIN).floor();
    count.clamp(1.0, 1e9) as i64
}

/// Euclidean cell size in a shell: half the tangential scale there.
fn cell_size(shell: i64) -> f64 {
    let s = (shell + 1) as f64 * BIN;
    0.5 / s.cosh()
}

impl CenterIndex {
    pub fn new(n: usize) -> Self {
        CenterIndex {
            n,
            points: Vec::new(),
            buckets: HashMap::new(),
            cells: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn key(&self, z: &[Complex64]) -> (i64, i64) {
        let shell = (shell_radius(z) / BIN).floor() as i64;
        let ns = sectors(shell);
        let a = z[0].arg().rem_euclid(2.0 * PI);
        (shell, ((a / (2.0 * PI) * ns as f64).floor() as i64).min(ns - 1))
    }

    pub fn insert(&mut self, z: Vec<Complex64>) -> usize {
        let id = self.points.len();
        if self.n == 1 {
            let k = self.key(&z);
            self.buckets.entry(k).or_default().push(id);
        } else {
            let shell = (shell_radius(&z) / BIN).floor() as i64;
            let size = cell_size(shell);
            let mut key = vec![shell];
            for c in &z {
                key.push((c.re / size).floor() as i64);
                key.push((c.im / size).floor() as i64);
            }
            self.cells.entry(key).or_default().push(id);
        }
        self.points.push(z);
        id
    }

    /// Ball queries: the Euclidean image of `B(z, rho)` lies within
    /// `rho sqrt((1-|z|^2)/(1-rho^2|z|^2))` of `z (1-rho^2)/(1-rho^2|z|^2)`.
    fn for_each_within_ball<F: FnMut(usize, f64) -> bool>(
        &self,
        z: &[Complex64],
        rho_max: f64,
        lo: i64,
        hi: i64,
        f: &mut F,
    ) -> bool {
        let a2 = norm_sq(z);
        let q = 1.0 - rho_max * rho_max * a2;
        let scale = (1.0 - rho_max * rho_max) / q;
        let reach = rho_max * ((1.0 - a2) / q).sqrt() * (1.0 + 1e-9) + 1e-15;
        let centre: Vec<f64> = z.iter().flat_map(|c| [c.re * scale, c.im * scale]).collect();
        let cells: f64 = (lo..=hi)
            .map(|shell| {
                let size = cell_size(shell);
                centre.iter().map(|x| ((x + reach) / size).floor() - ((x - reach) / size).floor() + 1.0).product::<f64>()
            })
            .sum();
        if !(rho_max < 1.0 && cells <= self.scan_limit()) {
            return self.scan_all(z, rho_max, f);
        }
        for shell in lo..=hi {
            let size = cell_size(shell);
            let ranges: Vec<(i64, i64)> = centre
                .iter()
                .map(|x| (((x - reach) / size).floor() as i64, ((x + reach) / size).floor() as i64))
                .collect();
            let mut key: Vec<i64> = std::iter::once(shell).chain(ranges.iter().map(|r| r.0)).collect();
            loop {
                if let Some(ids) = self.cells.get(&key) {
                    for &id in ids {
                        let d = pseudo_distance(z, &self.points[id]);
                        if d < rho_max && !f(id, d) {
                            return false;
                        }
                    }
                }
                // odometer over the box of cells
                let mut k = 0;
                loop {
                    if k == ranges.len() {
                        break;
                    }
                    if key[k + 1] < ranges[k].1 {
                        key[k + 1] += 1;
                        break;
                    }
                    key[k + 1] = ranges[k].0;
                    k += 1;
                }
                if k == ranges.len() {
                    break;
                }
            }
        }
        true
    }

    fn scan_limit(&self) -> f64 {
        4.0 * self.points.len().max(16) as f64
    }

    fn scan_all<F: FnMut(usize, f64) -> bool>(&self, z: &[Complex64], rho_max: f64, f: &mut F) -> bool {
        for (id, p) in self.points.iter().enumerate() {
            let d = pseudo_distance(z, p);
            if d < rho_max && !f(id, d) {
                return false;
            }
        }
        true
    }

    pub fn point(&self, id: usize) -> &[Complex64] {
        &self.points[id]
    }

    /// Calls `f(id, rho)` for every centre with `rho(z, centre) < rho_max`;
    /// stops early when `f` returns `false`.
    pub fn for_each_within<F: FnMut(usize, f64) -> bool>(&self, z: &[Complex64], rho_max: f64, mut f: F) {
        let t = rho_max.atanh();
        let s = shell_radius(z);
        let lo = ((s - t) / BIN).floor().max(0.0) as i64;
        let hi = ((s + t) / BIN).floor() as i64;
        if self.n > 1 {
            self.for_each_within_ball(z, rho_max, lo, hi, &mut f);
            return;
        }
        // huge radii reach more cells than there are points
        if rho_max >= 1.0 || (lo..=hi).map(|sh| sectors(sh) as f64).sum::<f64>() > self.scan_limit() {
            self.scan_all(z, rho_max, &mut f);
            return;
        }
        // angular half-width of the Euclidean image of the ball
        let half = {
            let (c, rad) = disk_ball_euclidean(z[0], rho_max);
            let cn = c.norm();
            if rad >= cn {
                None
            } else {
                Some((c.arg(), (rad / cn).asin()))
            }
        };
        for shell in lo..=hi {
            let ns = sectors(shell);
            let range: Vec<i64> = match half {
                Some((a, hw)) => {
                    let w = 2.0 * PI / ns as f64;
                    let a0 = ((a - hw) / w).floor() as i64;
                    let a1 = ((a + hw) / w).floor() as i64;
                    if a1 - a0 + 1 >= ns {
                        (0..ns).collect()
                    } else {
                        (a0..=a1).map(|k| k.rem_euclid(ns)).collect()
                    }
                }
                _ => (0..ns).collect(),
            };
            for sec in range {
                if let Some(ids) = self.buckets.get(&(shell, sec)) {
                    for &id in ids {
                        let d = pseudo_distance(z, &self.points[id]);
                        if d < rho_max && !f(id, d) {
                            return;
                        }
                    }
                }
            }
        }
    }

    pub fn any_within(&self, z: &[Complex64], rho_max: f64) -> bool {
        let mut found = false;
        self.for_each_within(z, rho_max, |_, _| {
            found = true;
            false
        });
        found
    }

    pub fn count_within(&self, z: &[Complex64], rho_max: f64) -> usize {
        let mut c = 0;
        self.for_each_within(z, rho_max, |_, _| {
            c += 1;
            true
        });
        c
    }
}

/// Candidate spacing (Kobayashi) of the greedy stream. On the ball the net
/// is coarser: a grid of spacing `h` in `2n` real directions leaves every
/// point within about `h sqrt(2n)/2` of a candidate.
fn candidate_spacing(n: usize, r: f64) -> f64 {
    let room = r.atanh() - (0.5 * r).atanh();
    if n == 1 {
        (0.5 * room).min(0.1)
    } else {
        0.9 * room * 2.0 / (2.0 * n as f64).sqrt()
    }
}

/// Points `e^{i psi} (x_1, x_2 e^{i phi_2}, ..., x_n e^{i phi_n})` of the unit
/// sphere of `C^n`: the overall phase `psi` at spacing `alpha_normal`, the
/// moduli `x` and the relative phases at spacing `alpha_tangent`.
pub(crate) fn sphere_net(n: usize, alpha_normal: f64, alpha_tangent: f64) -> Vec<Vec<Complex64>> {
    // moduli on the positive orthant of S^{n-1} in R^n
    fn moduli(n: usize, alpha: f64) -> Vec<Vec<f64>> {
        if n == 1 {
            return vec![vec![1.0]];
        }
        let steps = ((0.5 * PI) / alpha).ceil().max(1.0) as usize;
        let mut out = Vec::new();
        for i in 0..=steps {
            let chi = 0.5 * PI * i as f64 / steps as f64;
            let (c, s) = (chi.cos(), chi.sin());
            if s < 1e-12 {
                let mut v = vec![0.0; n];
                v[0] = 1.0;
                out.push(v);
                continue;
            }
            for rest in moduli(n - 1, alpha / s) {
                let mut v = vec![c];
                v.extend(rest.iter().map(|x| x * s));
                out.push(v);
            }
        }
        out
    }
    let psi_count = ((2.0 * PI) / alpha_normal).ceil().max(1.0) as usize;
    let mut out = Vec::new();
    for m in moduli(n, alpha_tangent) {
        let counts: Vec<usize> = m
            .iter()
            .enumerate()
            .map(|(k, x)| {
                if k == 0 {
                    psi_count
                } else if *x < 1e-12 {
                    1
                } else {
                    ((2.0 * PI * x) / alpha_tangent).ceil().max(1.0) as usize
                }
            })
            .collect();
        let total: usize = counts.iter().product();
        for flat in 0..total {
            let mut f = flat;
            let mut phases = Vec::with_capacity(n);
            for &c in &counts {
                phases.push(2.0 * PI * (f % c) as f64 / c as f64);
                f /= c;
            }
            let psi = phases[0];
            let z: Vec<Complex64> = m
                .iter()
                .zip(&phases)
                .enumerate()
                .map(|(k, (x, ph))| Complex64::from_polar(*x, if k == 0 { psi } else { psi + ph }))
                .collect();
            out.push(z);
        }
    }
    out
}

/// Kobayashi radii `0, h, 2h, ...` up to the shell `|z| = 1 - delta_min`.
fn shell_radii(h: f64, delta_min: f64) -> Vec<f64> {
    let s_max = (1.0 - delta_min).atanh();
    let mut out: Vec<f64> = (0..).map(|k| k as f64 * h).take_while(|s| *s < s_max - 1e-3 * h).collect();
    out.push(s_max);
    out
}

/// Greedy r-lattice. The candidate stream runs over hyperbolic shells of
/// decreasing `delta` (origin first), angles ascending within a shell; a
/// candidate is accepted when it is at pseudohyperbolic distance `>= r/2`
/// from every accepted centre. A rejected candidate lies within `r/2` of a
/// centre, and every point is within the candidate spacing of a candidate,
/// so the `r`-balls cover `{delta >= delta_min}`.
pub fn build_lattice(domain: &ModelDomain, r: f64, delta_min: f64) -> Result<RLattice> {
    check_radius(r)?;
    if !(delta_min >= 1e-4 && delta_min < 1.0) {
        return Err(LabError::param("delta_min", format!("must lie in [1e-4, 1), got {delta_min}")));
    }
    let n = domain.dim();
    let h = candidate_spacing(n, r);
    let mut index = CenterIndex::new(n);
    let mut centers = Vec::new();
    for s in shell_radii(h, delta_min) {
        let rho = s.tanh();
        let shell: Vec<Vec<Complex64>> = if s == 0.0 {
            vec![vec![Complex64::new(0.0, 0.0); n]]
        } else if n == 1 {
            let count = (PI * (2.0 * s).sinh() / h).ceil() as usize;
            (0..count)
                .map(|j| vec![Complex64::from_polar(rho, 2.0 * PI * j as f64 / count as f64)])
                .collect()
        } else {
            // hyperbolic scales: 1 - rho^2 in the complex-normal direction,
            // its square root tangentially
            let w = 1.0 - rho * rho;
            sphere_net(n, h * w / rho, h * w.sqrt() / rho)
                .into_iter()
                .map(|u| u.into_iter().map(|c| c * rho).collect())
                .collect()
        };
        for z in shell {
            if !index.any_within(&z, 0.5 * r) {
                centers.push(Point::new(z.clone())?);
                index.insert(z);
            }
        }
    }
    RLattice::from_centers(*domain, r, delta_min, centers)
}

/// Samples with invariant (hyperbolic) density on `{delta >= delta_floor}`.
pub fn hyperbolic_samples(domain: &ModelDomain, count: usize, delta_floor: f64, seed: u64) -> Vec<Point> {
    let n = domain.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // radial law: P(s <= x) = sinh^{2n}(x) / sinh^{2n}(s_max)
    let sh_max = (1.0 - delta_floor).atanh().sinh();
    (0..count)
        .map(|_| {
            let u: f64 = rng.random();
            let s = (u.powf(1.0 / (2 * n) as f64) * sh_max).asinh();
            let mut z: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            let scale = s.tanh() / norm_sq(&z).sqrt();
            z.iter_mut().for_each(|c| *c *= scale);
            Point::new(z).expect("sample inside the truncated domain")
        })
        .collect()
}

pub fn coverage_fraction(lattice: &RLattice, samples: &[Point]) -> f64 {
    if samples.is_empty() {
        return 1.0;
    }
    let idx = lattice.index();
    let hit = samples.par_iter().filter(|z| idx.any_within(z.coords(), lattice.r)).count();
    hit as f64 / samples.len() as f64
}

pub fn max_multiplicity(lattice: &RLattice, samples: &[Point]) -> usize {
    let idx = lattice.index();
    samples
        .par_iter()
        .map(|z| idx.count_within(z.coords(), lattice.big_r))
        .max()
        .unwrap_or(0)
}

fn check_count(sample_count: usize) -> Result<()> {
    if sample_count < MIN_VALIDATION_SAMPLES {
        return Err(LabError::param(
            "sample_count",
            format!("must be >= {MIN_VALIDATION_SAMPLES}, got {sample_count}"),
        ));
    }
    Ok(())
}

/// Fraction of hyperbolic samples of `{delta >= delta_min}` inside some
/// `B(a_k, r)`.
pub fn validate_covering(lattice: &RLattice, sample_count: usize, seed: u64) -> Result<f64> {
    check_count(sample_count)?;
    let s = hyperbolic_samples(&lattice.domain, sample_count, lattice.delta_min, seed);
    Ok(coverage_fraction(lattice, &s))
}

/// Largest number of balls `B(a_k, R)` containing one sample.
pub fn validate_multiplicity(lattice: &RLattice, sample_count: usize, seed: u64) -> Result<usize> {
    check_count(sample_count)?;
    let s = hyperbolic_samples(&lattice.domain, sample_count, lattice.delta_min, seed);
    Ok(max_multiplicity(lattice, &s))
}

/// Smallest pseudohyperbolic distance between two centres, capped at
/// [`SEPARATION_CAP`].
pub fn min_separation(lattice: &RLattice) -> f64 {
    let idx = lattice.index();
    (0..idx.len())
        .into_par_iter()
        .map(|i| {
            let mut best = SEPARATION_CAP;
            idx.for_each_within(idx.point(i), SEPARATION_CAP, |j, d| {
                if j != i {
                    best = best.min(d);
                }
                true
            });
            best
        })
        .reduce(|| SEPARATION_CAP, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn queries_with_radius_near_one_scan_all_points() {
        for n in [1, 2] {
            let mut idx = CenterIndex::new(n);
            let pts = [0.1, -0.5, 0.59];
            for x in pts {
                let mut z = vec![Complex64::new(0.0, 0.0); n];
                z[n - 1] = Complex64::new(x, 0.2);
                idx.insert(z);
            }
            let z0 = idx.point(0).to_vec();
            assert_eq!(idx.count_within(&z0, 10f64.tanh()), 3);
            assert_eq!(idx.count_within(&z0, 1e-3), 1);
        }
    }

    #[test]
    fn origin_is_first_and_spacing_holds() {
        let d = ModelDomain::disk();
        let lat = build_lattice(&d, 0.5, 1e-2).unwrap();
        assert_eq!(lat.centers[0].norm(), 0.0);
        assert!(min_separation(&lat) >= 0.25);
        assert_eq!(lat.big_r, 0.75);
    }

    #[test]
    fn index_agrees_with_brute_force() {
        let d = ModelDomain::disk();
        let lat = build_lattice(&d, 0.5, 1e-2).unwrap();
        let idx = lat.index();
        for z in hyperbolic_samples(&d, 2000, 1e-3, 9) {
            for rho in [0.25, 0.5, 0.75] {
                let brute = lat
                    .centers
                    .iter()
                    .filter(|c| pseudo_distance(z.coords(), c.coords()) < rho)
                    .count();
                assert_eq!(idx.count_within(z.coords(), rho), brute);
            }
        }
    }

    #[test]
    fn ball_index_agrees_with_brute_force() {
        let b = ModelDomain::ball(2).unwrap();
        let lat = build_lattice(&b, 0.5, 0.3).unwrap();
        let idx = lat.index();
        for z in hyperbolic_samples(&b, 500, 0.1, 4) {
            for rho in [0.25, 0.75] {
                let brute = lat
                    .centers
                    .iter()
                    .filter(|c| pseudo_distance(z.coords(), c.coords()) < rho)
                    .count();
                assert_eq!(idx.count_within(z.coords(), rho), brute);
            }
        }
    }

    #[test]
    fn trivial_validators() {
        let d = ModelDomain::disk();
        let one = RLattice::from_centers(d, 0.9, 1e-2, vec![d.origin()]).unwrap();
        let inner = hyperbolic_samples(&d, 10_000, 0.5, 1);
        assert_eq!(coverage_fraction(&one, &inner), 1.0);
        assert_eq!(max_multiplicity(&one, &inner), 1);
        let empty = RLattice::from_centers(d, 0.5, 1e-2, vec![]).unwrap();
        assert_eq!(validate_covering(&empty, 10_000, 1).unwrap(), 0.0);
        assert!(validate_covering(&empty, 100, 1).is_err());
    }

    #[test]
    fn ball_lattice_covers() {
        let b = ModelDomain::ball(2).unwrap();
        let lat = build_lattice(&b, 0.5, 0.1).unwrap();
        assert!(min_separation(&lat) >= 0.25);
        assert_eq!(validate_covering(&lat, 10_000, 3).unwrap(), 1.0);
    }

    #[test]
    fn sphere_net_is_on_sphere() {
        for n in 1..=3 {
            let net = sphere_net(n, 0.2, 0.3);
            assert!(net.iter().all(|z| (norm_sq(z) - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn json_roundtrip() {
        let d = ModelDomain::disk();
        let mut lat = build_lattice(&d, 0.5, 0.1).unwrap();
        lat.multiplicity = Some(7);
        let back = RLattice::from_json(&lat.to_json().unwrap()).unwrap();
        assert_eq!(back, lat);
    }
}
