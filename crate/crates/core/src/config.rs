//! Run configuration: a TOML file with `[domain]`, `[quadrature]`,
//! `[lattice]`, `[measure]`, `[analysis]` and `[experiment]` sections, plus
//! `--section.key=value` overrides applied before deserialization.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::Thresholds;
use crate::geometry::{DomainKind, ModelDomain, Point};
use crate::lattice::MIN_VALIDATION_SAMPLES;
use crate::measures::Measure;
use crate::{LabError, QuadratureRule, Result};

/// The `(p, beta)` cells of the default kernel-regime grid.
pub const DEFAULT_GRID: [[f64; 2]; 6] = [[1.0, 0.5], [2.0, 0.0], [2.0, 1.0], [2.0, 2.0], [2.0, 3.0], [3.0, 1.0]];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Drives every random choice of the run (validation samples, Monte Carlo
    /// nodes).
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Also write log-log SVG plots.
    pub plots: bool,
    pub domain: DomainSection,
    pub quadrature: QuadratureRule,
    pub lattice: LatticeSection,
    pub measure: MeasureSection,
    pub analysis: Thresholds,
    pub experiment: ExperimentSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            output_dir: PathBuf::from("out"),
            plots: false,
            domain: DomainSection::default(),
            quadrature: QuadratureRule::default(),
            lattice: LatticeSection::default(),
            measure: MeasureSection::default(),
            analysis: Thresholds::default(),
            experiment: ExperimentSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainSection {
    pub kind: DomainKind,
    pub n: usize,
}

impl Default for DomainSection {
    fn default() -> Self {
        DomainSection {
            kind: DomainKind::UnitDisk,
            n: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeSection {
    pub r: f64,
    pub delta_min: f64,
    /// Hyperbolic samples used by covering and multiplicity validation.
    pub samples: usize,
}

impl Default for LatticeSection {
    fn default() -> Self {
        LatticeSection {
            r: 0.5,
            delta_min: 1e-4,
            samples: MIN_VALIDATION_SAMPLES,
        }
    }
}

/// Either inline JSON or a JSON file; the volume measure when both are absent.
/// Loading replaces `file` by its contents so the embedded config is
/// self-contained.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub json: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    /// `(p, beta)` cells for `kernel-regimes`.
    pub grid: Vec<[f64; 2]>,
    pub theta: f64,
    pub p: f64,
    pub eta: f64,
    /// Target exponents for `toeplitz-gain`; the case default when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_grid: Option<Vec<f64>>,
    /// Separation of the generated sequence in `discrete`.
    pub eps: f64,
    /// Hand-placed sequence for `discrete`, rows `[re_1, im_1, ..., re_n, im_n]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    /// Also check the Berezin-Toeplitz identity in `berezin`.
    pub identity: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expect_carleson: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expect_vanishing: Option<bool>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            grid: DEFAULT_GRID.to_vec(),
            theta: 1.0,
            p: 2.0,
            eta: 0.5,
            r_grid: None,
            eps: 0.5,
            points: None,
            identity: true,
            expect_carleson: None,
            expect_vanishing: None,
        }
    }
}

/// What a subcommand needs from the config, checked before any computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Needs {
    KernelRegimes,
    Carleson,
    Berezin,
    Lattice,
    ToeplitzGain,
    Discrete,
}

fn cfg(msg: impl Into<String>) -> LabError {
    LabError::Config(msg.into())
}

/// Parses the right-hand side of an override as a TOML value, falling back to
/// a bare string.
fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Sets `a.b.c = value` in `table`, creating intermediate tables.
pub fn apply_override(table: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(cfg(format!("malformed override key `{key}`")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(cfg(format!("override `{key}`: `{p}` is not a section"))),
        };
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_value(raw));
    Ok(())
}

impl RunConfig {
    /// Reads `path` (if any), applies `overrides` in order and inlines a
    /// measure file.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| cfg(format!("{}: {e}", p.display())))?;
                toml::from_str::<toml::Table>(&text).map_err(|e| cfg(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for (k, v) in overrides {
            apply_override(&mut table, k, v)?;
        }
        let mut c: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| cfg(e.to_string()))?;
        c.quadrature.seed = c.seed;
        if let Some(f) = c.measure.file.take() {
            if c.measure.json.is_some() {
                return Err(cfg("measure: give either `json` or `file`, not both"));
            }
            let f = match path.and_then(Path::parent) {
                Some(dir) if f.is_relative() => dir.join(f),
                _ => f,
            };
            let text = std::fs::read_to_string(&f).map_err(|e| cfg(format!("measure file {}: {e}", f.display())))?;
            c.measure.json = Some(text.trim().to_string());
        }
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn domain(&self) -> Result<ModelDomain> {
        ModelDomain::new(self.domain.kind, self.domain.n).map_err(|e| cfg(format!("domain: {e}")))
    }

    /// `quadrature.seed` is always the run seed.
    pub fn rule(&self) -> QuadratureRule {
        self.quadrature.clone()
    }

    pub fn measure(&self) -> Result<Measure> {
        match &self.measure.json {
            Some(s) => Measure::from_json(s).map_err(|e| cfg(format!("measure: {e}"))),
            None => Ok(Measure::volume()),
        }
    }

    pub fn grid(&self) -> Vec<(f64, f64)> {
        self.experiment.grid.iter().map(|c| (c[0], c[1])).collect()
    }

    /// Hand-placed points, if any.
    pub fn points(&self) -> Result<Option<Vec<Point>>> {
        let n = self.domain.n;
        let Some(rows) = &self.experiment.points else {
            return Ok(None);
        };
        rows.iter()
            .enumerate()
            .map(|(i, row)| {
                if row.len() != 2 * n {
                    return Err(cfg(format!("experiment.points[{i}]: need {} numbers, got {}", 2 * n, row.len())));
                }
                let z = row.chunks(2).map(|c| num_complex::Complex64::new(c[0], c[1])).collect();
                Point::new(z).map_err(|e| cfg(format!("experiment.points[{i}]: {e}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    pub fn validate(&self, needs: Needs) -> Result<()> {
        let domain = self.domain()?;
        self.quadrature.validate().map_err(|e| cfg(format!("quadrature: {e}")))?;
        let e = &self.experiment;
        let lat = &self.lattice;
        let uses_lattice = matches!(needs, Needs::Carleson | Needs::Lattice | Needs::Discrete);
        if uses_lattice {
            if !(lat.r > 0.0 && lat.r < 1.0) {
                return Err(cfg(format!("lattice.r must lie in (0, 1), got {}", lat.r)));
            }
            if !(lat.delta_min >= 1e-4 && lat.delta_min < 1.0) {
                return Err(cfg(format!("lattice.delta_min must lie in [1e-4, 1), got {}", lat.delta_min)));
            }
        }
        if needs == Needs::Lattice && lat.samples < MIN_VALIDATION_SAMPLES {
            return Err(cfg(format!("lattice.samples must be >= {MIN_VALIDATION_SAMPLES}, got {}", lat.samples)));
        }
        if matches!(needs, Needs::Carleson | Needs::Berezin) {
            self.measure()?.check_domain(&domain).map_err(|e| cfg(format!("measure: {e}")))?;
        }
        if matches!(needs, Needs::Carleson | Needs::Berezin | Needs::Discrete) && !(e.theta > 0.0 && e.theta.is_finite()) {
            return Err(cfg(format!("experiment.theta must be > 0, got {}", e.theta)));
        }
        match needs {
            Needs::KernelRegimes => {
                if e.grid.is_empty() {
                    return Err(cfg("experiment.grid is empty"));
                }
                for (i, c) in e.grid.iter().enumerate() {
                    let (p, beta) = (c[0], c[1]);
                    if !(p >= 1.0 && p.is_finite()) {
                        return Err(cfg(format!("experiment.grid[{i}] = (p = {p}, beta = {beta}): need finite p >= 1")));
                    }
                    if !(beta > -1.0 && beta.is_finite()) {
                        return Err(cfg(format!("experiment.grid[{i}] = (p = {p}, beta = {beta}): need beta > -1")));
                    }
                }
            }
            Needs::ToeplitzGain => {
                if !(e.eta > 0.0 && e.eta.is_finite()) {
                    return Err(cfg(format!("experiment.eta must be > 0, got {}", e.eta)));
                }
                if !(e.p >= 1.0 && e.p.is_finite()) {
                    return Err(cfg(format!("experiment.p must be finite and >= 1, got {}", e.p)));
                }
                if let Some(g) = &e.r_grid {
                    if g.is_empty() {
                        return Err(cfg("experiment.r_grid is empty"));
                    }
                    if let Some(r) = g.iter().find(|r| r.is_nan() || **r < e.p) {
                        return Err(cfg(format!("experiment.r_grid entry {r} is below p = {}", e.p)));
                    }
                    if g.windows(2).any(|w| w[1] <= w[0]) {
                        return Err(cfg("experiment.r_grid must be strictly increasing"));
                    }
                }
            }
            Needs::Discrete => {
                if !(e.eps > 0.0 && e.eps.is_finite()) {
                    return Err(cfg(format!("experiment.eps must be > 0, got {}", e.eps)));
                }
                if let Some(pts) = self.points()? {
                    if pts.is_empty() {
                        return Err(cfg("experiment.points is empty"));
                    }
                    for p in &pts {
                        domain.check(p).map_err(|e| cfg(format!("experiment.points: {e}")))?;
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ov(k: &str, v: &str) -> (String, String) {
        (k.to_string(), v.to_string())
    }

    #[test]
    fn overrides_parse_toml_values() {
        let c = RunConfig::load(
            None,
            &[
                ov("experiment.theta", "2"),
                ov("domain.kind", "unit-ball"),
                ov("domain.n", "2"),
                ov("experiment.grid", "[[2, 0]]"),
                ov("seed", "7"),
            ],
        )
        .unwrap();
        assert_eq!(c.experiment.theta, 2.0);
        assert_eq!(c.domain().unwrap(), ModelDomain::ball(2).unwrap());
        assert_eq!(c.experiment.grid, vec![[2.0, 0.0]]);
        assert_eq!(c.rule().seed, 7);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::load(None, &[ov("experiment.thetta", "2")]).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let c = RunConfig::load(None, &[ov("measure.json", r#"'{"variant":"density","eta":2}'"#)]).unwrap();
        let back: RunConfig = toml::from_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.measure().unwrap(), Measure::density(2.0).unwrap());
    }

    #[test]
    fn invalid_grid_cell_is_named() {
        let c = RunConfig::load(None, &[ov("experiment.grid", "[[2, 0], [2, -1.5]]")]).unwrap();
        let msg = c.validate(Needs::KernelRegimes).unwrap_err().to_string();
        assert!(msg.contains("grid[1]") && msg.contains("-1.5"), "{msg}");
        let c = RunConfig::load(None, &[ov("experiment.grid", "[]")]).unwrap();
        assert!(c.validate(Needs::KernelRegimes).is_err());
    }
}
