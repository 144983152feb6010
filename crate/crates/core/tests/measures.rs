use bergman_lab::geometry::{automorphism, automorphism_jacobian};
use bergman_lab::kernel::kernel_raw;
use bergman_lab::lattice::build_lattice;
use bergman_lab::measures::*;
use bergman_lab::quadrature::integrate;
use bergman_lab::{ModelDomain, Point, QuadratureRule};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_point(rng: &mut ChaCha8Rng, n: usize, max_norm: f64) -> Point {
    let z: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let norm = z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let t = max_norm * rng.random::<f64>().sqrt() / norm;
    Point::new(z.iter().map(|c| c * t).collect()).unwrap()
}

/// `int_{B(z0, R)} g dnu`, pulled back through `phi_{z0}` to the Euclidean
/// ball of radius `R`.
fn ball_integral(d: &ModelDomain, z0: &Point, big_r: f64, g: impl Fn(&[Complex64]) -> f64 + Sync) -> f64 {
    let n = d.dim();
    let a = z0.coords();
    let rule = QuadratureRule::tensor_product();
    let v = integrate(
        d,
        |node| {
            let u: Vec<Complex64> = node.z.iter().map(|c| c * big_r).collect();
            g(&automorphism(a, &u)) * automorphism_jacobian(a, &u)
        },
        &rule,
    )
    .unwrap()
    .value;
    v * big_r.powi(2 * n as i32)
}

#[test]
fn kernel_powers_satisfy_the_submean_estimate() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let r = 0.5;
    let big_r = 0.5 * (1.0 + r);
    for d in [ModelDomain::disk(), ModelDomain::ball(2).unwrap()] {
        let mut k_r: f64 = 0.0;
        for _ in 0..20 {
            let z0 = random_point(&mut rng, d.dim(), 0.99);
            let a = random_point(&mut rng, d.dim(), 0.95);
            for p in [1.0, 2.0, 3.0] {
                let f = |z: &[Complex64]| kernel_raw(z, a.coords()).norm().powf(p);
                let mean = ball_integral(&d, &z0, big_r, f) / d.kobayashi_ball_volume(&z0, r).unwrap();
                k_r = k_r.max(f(z0.coords()) / mean);
            }
        }
        println!("n = {}: empirical submean constant K_r = {k_r}", d.dim());
        assert!(k_r.is_finite() && k_r > 0.0);
    }
}

#[test]
fn ball_integral_of_one_is_the_volume() {
    let d = ModelDomain::ball(2).unwrap();
    let z0 = d.point_on_axis(0.9).unwrap();
    let v = ball_integral(&d, &z0, 0.75, |_| 1.0);
    let want = d.kobayashi_ball_volume(&z0, 0.75).unwrap();
    assert!((v - want).abs() <= 1e-6 * want, "{v} {want}");
}

#[test]
fn shift_conjugation_preserves_profiles() {
    let d = ModelDomain::disk();
    let lat = build_lattice(&d, 0.5, 1e-3).unwrap();
    let atoms = build_lattice(&d, 0.3, 1e-3).unwrap();
    let atomic = Measure::atomic(atoms.centers.iter().map(|c| (c.clone(), c.delta().powi(2))).collect()).unwrap();
    for mu in [Measure::volume(), atomic] {
        for (theta, eta) in [(1.0, 1.0), (1.2, 0.5)] {
            let a = carleson_profile(&mu, &d, &lat, theta).unwrap();
            let b = carleson_profile(&shift_measure(&mu, eta).unwrap(), &d, &lat, theta + eta / 2.0).unwrap();
            let q: Vec<f64> = a
                .samples
                .iter()
                .zip(&b.samples)
                .filter(|(x, _)| x.1 > 0.0)
                .map(|(x, y)| y.1 / x.1)
                .collect();
            assert!(!q.is_empty());
            assert!(a.samples.iter().zip(&b.samples).all(|(x, y)| (x.1 > 0.0) == (y.1 > 0.0)));
            let band = q.iter().cloned().fold(f64::MIN, f64::max) / q.iter().cloned().fold(f64::MAX, f64::min);
            assert!(band <= 3.0, "band {band}");
        }
    }
}

#[test]
fn generated_sequence_shells_grow_by_exp_two_eps() {
    let d = ModelDomain::disk();
    for eps in [0.35, 0.5] {
        let seq = generate_uniformly_discrete(&d, eps, 1e-4).unwrap();
        let mut shells: Vec<(i64, usize)> = Vec::new();
        for p in seq.points() {
            let j = (p.norm().atanh() / eps).round() as i64;
            match shells.last_mut() {
                Some((k, c)) if *k == j => *c += 1,
                _ => shells.push((j, 1)),
            }
        }
        let m = shells.len();
        let growth = shells[m - 1].1 as f64 / shells[m - 2].1 as f64;
        let want = (2.0 * eps).exp();
        assert!((growth / want - 1.0).abs() <= 0.05, "eps {eps}: {growth} vs {want}");
    }
}

#[test]
fn uniformly_discrete_measures_on_the_ball() {
    let b = ModelDomain::ball(2).unwrap();
    let seq = generate_uniformly_discrete(&b, 0.5, 5e-2).unwrap();
    assert!(min_kobayashi_separation(seq.points(), 1.0) >= 0.5 * (1.0 - 1e-9));
    let lat = build_lattice(&b, 0.5, 5e-2).unwrap();
    let mu = discrete_theta_measure(&seq, 1.0).unwrap();
    let prof = carleson_profile(&mu, &b, &lat, 1.0).unwrap();
    assert!(prof.sup_ratio.is_finite() && prof.sup_ratio > 0.0);
    let pts: Vec<f64> = seq.points().iter().map(|p| p.delta()).collect();
    assert!(pts.iter().cloned().fold(f64::MAX, f64::min) >= 5e-2);
}
