//! Synthetic regime series with randomized constants.

use bergman_lab::analysis::RegimeKind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `delta = 2^{-j}`, `j = 4..=17`, as on the default boundary path.
pub fn deltas() -> Vec<f64> {
    (4..=17).map(|j| 2f64.powi(-j)).collect()
}

/// Ten series per regime: `C delta^e` with `0.3 <= |e| <= 3`,
/// `C (|ln delta| + c0)` with `0 <= c0 <= 2`, and `C (1 + b delta^g)`; each
/// with 1% multiplicative noise.
pub fn synthetic_series(seed: u64) -> Vec<(RegimeKind, Vec<(f64, f64)>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for regime in 0..3 {
        for _ in 0..10 {
            let c = 10f64.powf(rng.random_range(-3.0..3.0));
            let (kind, f): (RegimeKind, Box<dyn Fn(f64) -> f64>) = match regime {
                0 => {
                    let mag: f64 = rng.random_range(0.3..3.0);
                    let e = if rng.random_bool(0.7) { -mag } else { mag };
                    (RegimeKind::Power { exponent: e }, Box::new(move |d: f64| c * d.powf(e)))
                }
                1 => {
                    let c0: f64 = rng.random_range(0.0..2.0);
                    (RegimeKind::Logarithmic, Box::new(move |d: f64| c * (d.ln().abs() + c0)))
                }
                _ => {
                    let b: f64 = rng.random_range(-0.5..1.0);
                    let g: f64 = rng.random_range(0.5..2.0);
                    (RegimeKind::Bounded, Box::new(move |d: f64| c * (1.0 + b * d.powf(g))))
                }
            };
            let samples = deltas()
                .into_iter()
                .map(|d| (d, f(d) * (1.0 + 0.01 * rng.random_range(-1.0..1.0))))
                .collect();
            out.push((kind, samples));
        }
    }
    out
}
