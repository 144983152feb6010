//! Power-law fits on `(delta, value)` profiles and the three-way
//! classification power / logarithmic / bounded.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::{ModelDomain, Point};
use crate::kernel::kernel_moment_profile;
use crate::quadrature::QuadratureRule;

/// Calibration constants of the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// Slopes with `|slope| <` this count as flat.
    pub slope_deadband: f64,
    /// Bounded series stay within `max/min <=` this factor.
    pub bounded_band: f64,
    /// Allowed deviation of a fitted exponent from the predicted one.
    pub exponent_tolerance: f64,
    /// Tail growth at or above this is "sustained".
    pub tail_growth: f64,
    pub min_samples: usize,
    pub min_decades: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            slope_deadband: 0.15,
            bounded_band: 10.0,
            exponent_tolerance: 0.1,
            tail_growth: 0.2,
            min_samples: 8,
            min_decades: 3.0,
        }
    }
}

/// Least-squares line through `(ln delta, ln value)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

fn check_samples(samples: &[(f64, f64)], t: &Thresholds) -> Result<()> {
    if samples.len() < t.min_samples {
        return Err(LabError::InsufficientData(format!(
            "at least {} samples, got {}",
            t.min_samples,
            samples.len()
        )));
    }
    for &(d, v) in samples {
        if !(v > 0.0) || !v.is_finite() {
            return Err(LabError::NonPositiveSample { delta: d, value: v });
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(LabError::InsufficientData(format!("positive deltas, got {d}")));
        }
    }
    let (lo, hi) = samples
        .iter()
        .fold((f64::MAX, f64::MIN), |(lo, hi), s| (lo.min(s.0), hi.max(s.0)));
    if (hi / lo).log10() < t.min_decades - 1e-9 {
        return Err(LabError::InsufficientData(format!(
            "delta spanning {} decades, got {:.2}",
            t.min_decades,
            (hi / lo).log10()
        )));
    }
    Ok(())
}

fn line_fit(x: &[f64], y: &[f64]) -> PowerFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let r_squared = if syy <= 1e-24 * (1.0 + my * my) {
        1.0
    } else {
        (slope * sxy / syy).clamp(0.0, 1.0)
    };
    PowerFit {
        slope,
        intercept,
        r_squared,
    }
}

pub fn fit_power_law_with(samples: &[(f64, f64)], t: &Thresholds) -> Result<PowerFit> {
    check_samples(samples, t)?;
    let x: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    Ok(line_fit(&x, &y))
}

pub fn fit_power_law(samples: &[(f64, f64)]) -> Result<PowerFit> {
    fit_power_law_with(samples, &Thresholds::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RegimeKind {
    Power { exponent: f64 },
    Logarithmic,
    Bounded,
    Unclassifiable,
}

impl RegimeKind {
    pub fn same_kind(&self, other: &RegimeKind) -> bool {
        std::mem::discriminant(self) == std::mem::discriminant(other)
    }
}

impl fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegimeKind::Power { exponent } => write!(f, "power({exponent:.3})"),
            RegimeKind::Logarithmic => write!(f, "logarithmic"),
            RegimeKind::Bounded => write!(f, "bounded"),
            RegimeKind::Unclassifiable => write!(f, "unclassifiable"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeClass {
    pub kind: RegimeKind,
    /// `r^2` of the log-log fit (of the `|log delta|`-normalized series for
    /// the logarithmic kind).
    pub fit_quality: f64,
    pub fit: PowerFit,
}

/// Flat and within the band: `|slope| < deadband`, `max/min <= band`.
fn is_flat(samples: &[(f64, f64)], t: &Thresholds) -> Result<(bool, PowerFit)> {
    let fit = fit_power_law_with(samples, t)?;
    let (lo, hi) = samples
        .iter()
        .fold((f64::MAX, f64::MIN), |(lo, hi), s| (lo.min(s.1), hi.max(s.1)));
    Ok((fit.slope.abs() < t.slope_deadband && hi / lo <= t.bounded_band, fit))
}

/// Growth over the boundary-most half, measured against `L = |ln delta|`:
/// the least-squares slope `dy/dL` there, times the full `L` range, over
/// `max y`. Constant-tending series give ~0, `y = c L` gives ~0.75.
pub fn tail_growth(samples: &[(f64, f64)]) -> f64 {
    let mut s: Vec<(f64, f64)> = samples.iter().map(|&(d, v)| (-d.ln(), v)).collect();
    s.sort_by(|a, b| a.0.total_cmp(&b.0));
    let half = s.len() / 2;
    let tail = &s[half..];
    let x: Vec<f64> = tail.iter().map(|p| p.0).collect();
    let y: Vec<f64> = tail.iter().map(|p| p.1).collect();
    let slope = line_fit(&x, &y).slope;
    let span = s[s.len() - 1].0 - s[0].0;
    let ymax = s.iter().map(|p| p.1).fold(f64::MIN, f64::max);
    slope * span / ymax
}

pub fn classify_regime_with(samples: &[(f64, f64)], t: &Thresholds) -> Result<RegimeClass> {
    let (flat, fit) = is_flat(samples, t)?;
    let growth = tail_growth(samples);
    if flat && growth < t.tail_growth {
        return Ok(RegimeClass {
            kind: RegimeKind::Bounded,
            fit_quality: fit.r_squared,
            fit,
        });
    }
    if samples.iter().all(|s| s.0 < 1.0) {
        let normalized: Vec<(f64, f64)> = samples.iter().map(|&(d, v)| (d, v / (-d.ln()))).collect();
        let (nflat, nfit) = is_flat(&normalized, t)?;
        if nflat && growth >= t.tail_growth {
            return Ok(RegimeClass {
                kind: RegimeKind::Logarithmic,
                fit_quality: nfit.r_squared,
                fit,
            });
        }
    }
    if fit.slope.abs() >= t.slope_deadband {
        return Ok(RegimeClass {
            kind: RegimeKind::Power { exponent: fit.slope },
            fit_quality: fit.r_squared,
            fit,
        });
    }
    Ok(RegimeClass {
        kind: RegimeKind::Unclassifiable,
        fit_quality: fit.r_squared,
        fit,
    })
}

pub fn classify_regime(samples: &[(f64, f64)]) -> Result<RegimeClass> {
    classify_regime_with(samples, &Thresholds::default())
}

/// Regime of `int |K(., z0)|^p delta^beta dnu` as `delta(z0) -> 0`:
/// `delta^{beta-(n+1)(p-1)}` below the critical weight, `|log delta|` at it,
/// bounded above it.
pub fn expected_bkp_regime(domain: &ModelDomain, p: f64, beta: f64) -> RegimeKind {
    let e = beta - domain.weight_exponent() * (p - 1.0);
    if e.abs() < 1e-12 {
        RegimeKind::Logarithmic
    } else if e < 0.0 {
        RegimeKind::Power { exponent: e }
    } else {
        RegimeKind::Bounded
    }
}

/// Does `observed` match `expected` in kind, and in exponent within `tol`?
pub fn regime_matches(expected: &RegimeKind, observed: &RegimeKind, tol: f64) -> bool {
    match (expected, observed) {
        (RegimeKind::Power { exponent: a }, RegimeKind::Power { exponent: b }) => (a - b).abs() <= tol,
        (a, b) => a.same_kind(b) && !matches!(a, RegimeKind::Unclassifiable),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BkpRow {
    pub p: f64,
    pub beta: f64,
    pub expected: RegimeKind,
    pub observed: Option<RegimeClass>,
    pub error: Option<String>,
    pub pass: bool,
    pub profile: Vec<(f64, f64)>,
}

/// Profiles every `(p, beta)` cell along `path` and compares the observed
/// regime with the predicted one.
pub fn verify_bkp_grid(
    domain: &ModelDomain,
    grid: &[(f64, f64)],
    path: &[Point],
    rule: &QuadratureRule,
    t: &Thresholds,
) -> Result<Vec<BkpRow>> {
    for &(p, beta) in grid {
        if !(p >= 1.0 && p.is_finite()) || !(beta > -1.0) {
            return Err(LabError::param("grid", format!("need p >= 1 finite and beta > -1, got ({p}, {beta})")));
        }
    }
    Ok(grid
        .par_iter()
        .map(|&(p, beta)| {
            let expected = expected_bkp_regime(domain, p, beta);
            let res = kernel_moment_profile(domain, p, beta, path, rule)
                .and_then(|prof| classify_regime_with(&prof, t).map(|c| (prof, c)));
            match res {
                Ok((profile, c)) => BkpRow {
                    p,
                    beta,
                    expected,
                    pass: regime_matches(&expected, &c.kind, t.exponent_tolerance),
                    observed: Some(c),
                    error: None,
                    profile,
                },
                Err(e) => BkpRow {
                    p,
                    beta,
                    expected,
                    observed: None,
                    error: Some(e.to_string()),
                    pass: false,
                    profile: Vec::new(),
                },
            }
        })
        .collect())
}

pub fn bkp_table_csv(rows: &[BkpRow]) -> String {
    let mut s = String::from("p,beta,expected,observed,slope,r_squared,pass\n");
    for r in rows {
        let (obs, slope, r2) = match &r.observed {
            Some(c) => (c.kind.to_string(), fmt_num(c.fit.slope), fmt_num(c.fit_quality)),
            None => (format!("error: {}", r.error.as_deref().unwrap_or("")), String::new(), String::new()),
        };
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_num(r.p),
            fmt_num(r.beta),
            r.expected,
            csv_field(&obs),
            slope,
            r2,
            r.pass
        ));
    }
    s
}

pub fn bkp_table_text(rows: &[BkpRow]) -> String {
    let mut s = format!(
        "{:>6} {:>6}  {:<16} {:<16} {:>8}  {}\n",
        "p", "beta", "expected", "observed", "r^2", "result"
    );
    for r in rows {
        let (obs, r2) = match &r.observed {
            Some(c) => (c.kind.to_string(), format!("{:.4}", c.fit_quality)),
            None => ("error".to_string(), "-".to_string()),
        };
        s.push_str(&format!(
            "{:>6} {:>6}  {:<16} {:<16} {:>8}  {}\n",
            r.p,
            r.beta,
            r.expected.to_string(),
            obs,
            r2,
            if r.pass { "pass" } else { "FAIL" }
        ));
    }
    s
}

/// Twelve significant digits.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..12).contains(&mag) {
        let dec = (11 - mag).max(0) as usize;
        let s = format!("{x:.dec$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.11e}")
    }
}

pub fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
        (4..=17).map(|j| 2f64.powi(-j)).map(|d| (d, f(d))).collect()
    }

    #[test]
    fn exact_power_fit() {
        let f = fit_power_law(&series(|x| x.powi(-2))).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-12 && (f.r_squared - 1.0).abs() < 1e-12);
        let f = fit_power_law(&series(|_| 5.0)).unwrap();
        assert!(f.slope.abs() < 1e-12 && f.r_squared == 1.0);
        let f = fit_power_law(&series(|x| x.powi(-2) * (1.0 + 0.01 * x.ln().sin()))).unwrap();
        assert!((f.slope + 2.0).abs() < 0.02);
    }

    #[test]
    fn fit_preconditions() {
        assert!(matches!(
            fit_power_law(&series(|x| x)[..5]),
            Err(LabError::InsufficientData(_))
        ));
        let narrow: Vec<(f64, f64)> = (0..10).map(|i| (0.1 + 0.01 * i as f64, 1.0)).collect();
        assert!(matches!(fit_power_law(&narrow), Err(LabError::InsufficientData(_))));
        let mut s = series(|x| x);
        s[3].1 = 0.0;
        assert!(matches!(fit_power_law(&s), Err(LabError::NonPositiveSample { .. })));
    }

    #[test]
    fn classify_examples() {
        let c = classify_regime(&series(|x| x.powf(-0.5))).unwrap();
        assert!(matches!(c.kind, RegimeKind::Power { exponent } if (exponent + 0.5).abs() < 1e-9));
        let c = classify_regime(&series(|x| x.ln().abs())).unwrap();
        assert_eq!(c.kind, RegimeKind::Logarithmic);
        let c = classify_regime(&series(|x| 3.0 - x)).unwrap();
        assert_eq!(c.kind, RegimeKind::Bounded);
        let c = classify_regime(&series(|x| 2.0 + x.ln().abs())).unwrap();
        assert_eq!(c.kind, RegimeKind::Logarithmic);
    }

    #[test]
    fn oscillating_series_is_unclassifiable() {
        let c = classify_regime(&series(|x| 1.0 + 0.99 * (3.0 * x.ln()).sin())).unwrap();
        assert_eq!(c.kind, RegimeKind::Unclassifiable);
    }

    #[test]
    fn expected_regimes_on_disk() {
        let d = ModelDomain::disk();
        assert_eq!(expected_bkp_regime(&d, 2.0, 0.0), RegimeKind::Power { exponent: -2.0 });
        assert_eq!(expected_bkp_regime(&d, 2.0, 2.0), RegimeKind::Logarithmic);
        assert_eq!(expected_bkp_regime(&d, 2.0, 3.0), RegimeKind::Bounded);
        assert_eq!(expected_bkp_regime(&d, 1.0, 0.0), RegimeKind::Logarithmic);
        let b = ModelDomain::ball(2).unwrap();
        assert_eq!(expected_bkp_regime(&b, 2.0, 0.0), RegimeKind::Power { exponent: -3.0 });
    }

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(0.5), "0.5");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_num(12345.678), "12345.678");
        assert_eq!(fmt_num(1.5e-7), "1.50000000000e-7");
        assert_eq!(fmt_num(-2.0), "-2");
    }
}
