use bergman_lab::analysis::{bkp_table_text, classify_regime, fit_power_law, verify_bkp_grid, RegimeKind, Thresholds};
use bergman_lab::kernel::{kernel_diagonal, kernel_moment_profile};
use bergman_lab::quadrature::default_path;
use bergman_lab::{ModelDomain, QuadratureRule};

#[test]
fn disk_grid_matches_trichotomy() {
    let d = ModelDomain::disk();
    let rule = QuadratureRule::default();
    let path = default_path(&d, rule.boundary_cutoff);
    let grid = [(1.0, 0.5), (2.0, 0.0), (2.0, 1.0), (2.0, 2.0), (2.0, 3.0), (3.0, 1.0)];
    let rows = verify_bkp_grid(&d, &grid, &path, &rule, &Thresholds::default()).unwrap();
    println!("{}", bkp_table_text(&rows));
    assert!(rows.iter().all(|r| r.pass));
}

#[test]
fn ball_spot_check() {
    let b = ModelDomain::ball(2).unwrap();
    let rule = QuadratureRule::default();
    let path = default_path(&b, rule.boundary_cutoff);
    let prof = kernel_moment_profile(&b, 2.0, 0.0, &path, &rule).unwrap();
    let c = classify_regime(&prof).unwrap();
    match c.kind {
        RegimeKind::Power { exponent } => assert!((exponent + 3.0).abs() <= 0.15, "{exponent}"),
        k => panic!("{k}"),
    }
}

#[test]
fn p1_beta0_is_logarithmic() {
    let d = ModelDomain::disk();
    let rule = QuadratureRule::default();
    let prof = kernel_moment_profile(&d, 1.0, 0.0, &default_path(&d, 1e-10), &rule).unwrap();
    assert_eq!(classify_regime(&prof).unwrap().kind, RegimeKind::Logarithmic);
}

#[test]
fn diagonal_band() {
    for d in [ModelDomain::disk(), ModelDomain::ball(2).unwrap()] {
        let vals: Vec<f64> = (0..60)
            .map(|i| 0.5 * (1e-4f64 / 0.5).powf(i as f64 / 59.0))
            .map(|dl| {
                let z = d.point_on_axis(1.0 - dl).unwrap();
                kernel_diagonal(&d, &z).unwrap().sqrt() * dl.powf(d.weight_exponent() / 2.0)
            })
            .collect();
        let max = vals.iter().cloned().fold(f64::MIN, f64::max);
        let min = vals.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max / min <= 2.0, "{}", max / min);
    }
}

#[test]
fn fit_stable_under_dropping_boundary_samples() {
    let d = ModelDomain::disk();
    let rule = QuadratureRule::default();
    let prof = kernel_moment_profile(&d, 2.0, 1.0, &default_path(&d, 1e-10), &rule).unwrap();
    let a = fit_power_law(&prof).unwrap().slope;
    let b = fit_power_law(&prof[..prof.len() - 2]).unwrap().slope;
    assert!((a - b).abs() <= 0.05, "{a} {b}");
}
