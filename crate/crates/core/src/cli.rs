//! `bergman-lab` subcommands. Exit codes: 0 pass, 1 experiment failure,
//! 2 usage or config error.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::analysis::{bkp_table_csv, bkp_table_text, fmt_num, verify_bkp_grid};
use crate::config::{Needs, RunConfig};
use crate::lattice::{build_lattice, min_separation, validate_covering, validate_multiplicity, RLattice};
use crate::measures::{
    berezin_exponent_profile, carleson_profile, discrete_theta_measure, generate_uniformly_discrete, CarlesonProfile,
    CarlesonVerdict, DecadeStatistic, Measure, SequenceFamily, VanishingVerdict,
};
use crate::plot::{loglog_svg, Series};
use crate::quadrature::default_path;
use crate::toeplitz::{berezin_identity_check, gain_experiment};
use crate::{LabError, ModelDomain, Result};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Largest accepted Berezin-Toeplitz identity residual.
pub const IDENTITY_TOLERANCE: f64 = 1e-3;

/// Top-level config keys that may be overridden as `--key=value`.
const TOP_LEVEL_KEYS: [&str; 3] = ["seed", "output_dir", "plots"];

#[derive(Parser, Debug)]
#[command(name = "bergman-lab", version, about = "Bergman kernel, Carleson measure and Toeplitz operator experiments")]
#[command(after_help = "Any config key can be overridden with --section.key=value, e.g. --experiment.theta=2")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Weighted kernel norm regimes over a (p, beta) grid.
    KernelRegimes(RunArgs),
    /// Lattice Carleson profile and Berezin exponent of a measure.
    Carleson(RunArgs),
    /// Berezin transform profile and the Berezin-Toeplitz identity.
    Berezin(RunArgs),
    /// Build and validate an r-lattice.
    Lattice(RunArgs),
    /// Integrability gain of T_{delta^eta}.
    ToeplitzGain(RunArgs),
    /// Carleson and vanishing profiles of a uniformly discrete sequence.
    Discrete(RunArgs),
    /// Summarize the reports found in the output directory.
    Report(RunArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML config file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Cap on worker threads.
    #[arg(long)]
    threads: Option<usize>,
}

/// Splits `--section.key=value` overrides from the clap arguments.
fn split_overrides(args: Vec<String>) -> (Vec<String>, Vec<(String, String)>) {
    let mut rest = Vec::new();
    let mut ov = Vec::new();
    for a in args {
        if let Some((k, v)) = a.strip_prefix("--").and_then(|s| s.split_once('=')) {
            if k.contains('.') || TOP_LEVEL_KEYS.contains(&k) {
                ov.push((k.to_string(), v.to_string()));
                continue;
            }
        }
        rest.push(a);
    }
    (rest, ov)
}

/// Parses arguments, runs one subcommand and returns the exit code.
pub fn run(args: Vec<String>) -> i32 {
    let (rest, overrides) = split_overrides(args);
    let cli = match Cli::try_parse_from(rest) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
        }
    };
    let (name, args, needs) = match &cli.command {
        Command::KernelRegimes(a) => ("kernel-regimes", a, Some(Needs::KernelRegimes)),
        Command::Carleson(a) => ("carleson", a, Some(Needs::Carleson)),
        Command::Berezin(a) => ("berezin", a, Some(Needs::Berezin)),
        Command::Lattice(a) => ("lattice", a, Some(Needs::Lattice)),
        Command::ToeplitzGain(a) => ("toeplitz-gain", a, Some(Needs::ToeplitzGain)),
        Command::Discrete(a) => ("discrete", a, Some(Needs::Discrete)),
        Command::Report(a) => ("report", a, None),
    };
    let mut config = match RunConfig::load(args.config.as_deref(), &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("bergman-lab {name}: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Some(o) = &args.out {
        config.output_dir = o.clone();
    }
    if let Some(needs) = needs {
        if let Err(e) = config.validate(needs) {
            eprintln!("bergman-lab {name}: {e}");
            return EXIT_CONFIG;
        }
    }
    if let Some(t) = args.threads {
        if t == 0 {
            eprintln!("bergman-lab {name}: --threads must be >= 1");
            return EXIT_CONFIG;
        }
        // a second call in one process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let out = match Output::new(name, &config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("bergman-lab {name}: {e}");
            return EXIT_CONFIG;
        }
    };
    let res = match &cli.command {
        Command::KernelRegimes(_) => cmd_kernel_regimes(&config, &out),
        Command::Carleson(_) => cmd_carleson(&config, &out),
        Command::Berezin(_) => cmd_berezin(&config, &out),
        Command::Lattice(_) => cmd_lattice(&config, &out),
        Command::ToeplitzGain(_) => cmd_toeplitz_gain(&config, &out),
        Command::Discrete(_) => cmd_discrete(&config, &out),
        Command::Report(_) => cmd_report(&config, &out),
    };
    match res {
        Ok(o) => {
            println!("{}", o.verdict);
            if o.pass {
                EXIT_PASS
            } else {
                EXIT_FAILURE
            }
        }
        Err(e @ LabError::Config(_)) => {
            eprintln!("bergman-lab {name}: {e}");
            EXIT_CONFIG
        }
        Err(e) => {
            eprintln!("bergman-lab {name}: {e}");
            EXIT_FAILURE
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub pass: bool,
    pub verdict: String,
}

/// Writes artifacts into the output directory, each prefixed with the config.
struct Output {
    dir: PathBuf,
    command: &'static str,
    header: String,
    config: Value,
    plots: bool,
}

impl Output {
    fn new(command: &'static str, c: &RunConfig) -> Result<Self> {
        std::fs::create_dir_all(&c.output_dir)
            .map_err(|e| LabError::Config(format!("output_dir {}: {e}", c.output_dir.display())))?;
        let mut header = format!("# bergman-lab {command}\n");
        for line in c.to_toml().lines() {
            if line.is_empty() {
                header.push_str("#\n");
            } else {
                header.push_str(&format!("# {line}\n"));
            }
        }
        Ok(Output {
            dir: c.output_dir.clone(),
            command,
            header,
            config: serde_json::to_value(c).map_err(|e| LabError::Io(e.to_string()))?,
            plots: c.plots,
        })
    }

    fn write(&self, name: &str, body: &str) -> Result<()> {
        let p = self.dir.join(name);
        std::fs::write(&p, body).map_err(|e| LabError::Io(format!("{}: {e}", p.display())))
    }

    fn text(&self, name: &str, body: &str) -> Result<()> {
        self.write(name, &format!("{}{body}", self.header))
    }

    /// `{"_config": ..., "command": ..., "pass": ..., "verdict": ..., ...}`.
    fn report(&self, name: &str, outcome: &Outcome, details: Value) -> Result<()> {
        let mut obj = serde_json::Map::new();
        obj.insert("_config".into(), self.config.clone());
        obj.insert("command".into(), json!(self.command));
        obj.insert("pass".into(), json!(outcome.pass));
        obj.insert("verdict".into(), json!(outcome.verdict));
        if let Value::Object(m) = round_json(details) {
            obj.extend(m);
        }
        let s = serde_json::to_string_pretty(&Value::Object(obj)).map_err(|e| LabError::Io(e.to_string()))?;
        self.write(name, &(s + "\n"))
    }

    fn plot(&self, name: &str, title: &str, ylabel: &str, series: &[Series]) -> Result<()> {
        if !self.plots {
            return Ok(());
        }
        let svg = loglog_svg(title, "delta", ylabel, series);
        let comment = self.header.replace("--", "- -");
        self.write(name, &format!("<!--\n{comment}-->\n{svg}"))
    }
}

/// Rounds every non-integer number to twelve significant digits.
fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            fmt_num(x).parse::<f64>().ok().and_then(serde_json::Number::from_f64).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

fn pairs_csv(cols: &str, rows: &[(f64, f64)]) -> String {
    let mut s = format!("{cols}\n");
    for &(a, b) in rows {
        s.push_str(&format!("{},{}\n", fmt_num(a), fmt_num(b)));
    }
    s
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

/// `Some(carleson)` unless the profile is inconclusive.
fn carleson_yes(v: CarlesonVerdict) -> Option<bool> {
    match v {
        CarlesonVerdict::Bounded => Some(true),
        CarlesonVerdict::Unbounded => Some(false),
        CarlesonVerdict::Inconclusive => None,
    }
}

fn vanishing_yes(v: VanishingVerdict) -> Option<bool> {
    match v {
        VanishingVerdict::Vanishing => Some(true),
        VanishingVerdict::NonVanishing => Some(false),
        VanishingVerdict::Inconclusive => None,
    }
}

/// `"<label>: yes; vanishing: no"`, or `"<label>: no"`.
fn carleson_label(label: &str, c: Option<bool>, v: Option<bool>) -> String {
    let fmt = |x: Option<bool>| x.map_or("inconclusive", yes_no);
    match c {
        Some(true) => format!("{label}: yes; vanishing: {}", fmt(v)),
        other => format!("{label}: {}", fmt(other)),
    }
}

/// Profile verdicts checked against the optional expectations.
fn expectation_pass(c: &RunConfig, carleson: Option<bool>, vanishing: Option<bool>) -> bool {
    let e = &c.experiment;
    let ok_c = match e.expect_carleson {
        Some(want) => carleson == Some(want),
        None => carleson.is_some(),
    };
    // vanishing is only meaningful for a Carleson measure
    let ok_v = match e.expect_vanishing {
        Some(want) => vanishing == Some(want),
        None => carleson != Some(true) || vanishing.is_some(),
    };
    ok_c && ok_v
}

fn decades_json(p: &CarlesonProfile) -> Value {
    Value::Array(
        p.decades()
            .iter()
            .map(|d| json!({"k": d.k, "count": d.count, "median": d.median, "max": d.max}))
            .collect(),
    )
}

fn decade_series(p: &CarlesonProfile) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    let dec = p.decades();
    let x = |k: i32| 10f64.powf(-(k as f64) - 0.5);
    (
        dec.iter().map(|d| (x(d.k), d.median)).collect(),
        dec.iter().map(|d| (x(d.k), d.max)).collect(),
    )
}

fn cmd_kernel_regimes(c: &RunConfig, out: &Output) -> Result<Outcome> {
    let domain = c.domain()?;
    let rule = c.rule();
    let path = default_path(&domain, rule.boundary_cutoff);
    let rows = verify_bkp_grid(&domain, &c.grid(), &path, &rule, &c.analysis)?;
    out.text("bkp_grid.csv", &bkp_table_csv(&rows))?;
    out.text("bkp_grid.txt", &bkp_table_text(&rows))?;
    let failed: Vec<Value> = rows
        .iter()
        .filter(|r| !r.pass)
        .map(|r| json!({"p": r.p, "beta": r.beta, "expected": r.expected.to_string(), "error": r.error}))
        .collect();
    let pass = failed.is_empty();
    let outcome = Outcome {
        pass,
        verdict: format!("kernel regimes: {}/{} cells pass", rows.len() - failed.len(), rows.len()),
    };
    out.report("kernel_regimes.json", &outcome, json!({"cells": rows.len(), "failed": failed}))?;
    let series: Vec<Series> = rows
        .iter()
        .map(|r| Series {
            label: format!("p={} beta={}", fmt_num(r.p), fmt_num(r.beta)),
            points: &r.profile,
        })
        .collect();
    out.plot("bkp_grid.svg", "weighted kernel norms", "norm", &series)?;
    Ok(outcome)
}

fn berezin_verdicts(c: &RunConfig, slope: f64, domain: &ModelDomain) -> (f64, bool, bool) {
    let predicted = (domain.dim() + 1) as f64 * (c.experiment.theta - 1.0);
    let tol = c.analysis.exponent_tolerance;
    (predicted, slope >= predicted - tol, slope > predicted + tol)
}

fn cmd_carleson(c: &RunConfig, out: &Output) -> Result<Outcome> {
    let domain = c.domain()?;
    let mu = c.measure()?;
    let theta = c.experiment.theta;
    let lat = build_lattice(&domain, c.lattice.r, c.lattice.delta_min)?;
    let prof = carleson_profile(&mu, &domain, &lat, theta)?;
    let stat = if mu.has_atoms() { DecadeStatistic::Max } else { DecadeStatistic::Median };
    let geo_c = carleson_yes(prof.carleson_verdict(&c.analysis));
    let geo_v = vanishing_yes(prof.vanishing_verdict(stat));
    let rule = c.rule();
    let path = default_path(&domain, rule.boundary_cutoff);
    let (fit, bsamples) = berezin_exponent_profile(&mu, &domain, &path, &rule)?;
    let (predicted, ber_c, ber_v) = berezin_verdicts(c, fit.slope, &domain);
    let verdict = carleson_label("theta-Carleson", geo_c, geo_v);
    let outcome = Outcome {
        pass: expectation_pass(c, geo_c, geo_v),
        verdict: verdict.clone(),
    };
    out.text("carleson_profile.csv", &pairs_csv("delta,ratio", &prof.samples))?;
    out.text("berezin_profile.csv", &pairs_csv("delta,berezin", &bsamples))?;
    out.report(
        "carleson_verdict.json",
        &outcome,
        json!({
            "theta": theta,
            "lattice_centres": lat.len(),
            "geometric": {
                "carleson": geo_c,
                "vanishing": geo_v,
                "statistic": stat,
                "sup_ratio": prof.sup_ratio,
                "decay_trend": prof.decay_trend,
                "decades": decades_json(&prof),
            },
            "berezin": {
                "verdict": carleson_label("theta-Carleson", Some(ber_c), Some(ber_v)),
                "carleson": ber_c,
                "vanishing": ber_v,
                "slope": fit.slope,
                "r_squared": fit.r_squared,
                "predicted_exponent": predicted,
            },
            "agree": geo_c == Some(ber_c) && (!ber_c || geo_v == Some(ber_v)),
        }),
    )?;
    let (med, max) = decade_series(&prof);
    out.plot(
        "carleson_profile.svg",
        "Carleson ratio by decade",
        "ratio",
        &[
            Series { label: "median".into(), points: &med },
            Series { label: "max".into(), points: &max },
        ],
    )?;
    out.plot(
        "berezin_profile.svg",
        "Berezin transform",
        "B mu",
        &[Series { label: "B mu".into(), points: &bsamples }],
    )?;
    Ok(outcome)
}

fn cmd_berezin(c: &RunConfig, out: &Output) -> Result<Outcome> {
    let domain = c.domain()?;
    let mu = c.measure()?;
    let rule = c.rule();
    let path = default_path(&domain, rule.boundary_cutoff);
    let (fit, samples) = berezin_exponent_profile(&mu, &domain, &path, &rule)?;
    let (predicted, ber_c, ber_v) = berezin_verdicts(c, fit.slope, &domain);
    let mut residuals = Vec::new();
    if c.experiment.identity {
        for z in path.iter().filter(|z| z.delta() >= 1e-3) {
            residuals.push((z.delta(), berezin_identity_check(&mu, &domain, z, &rule)?));
        }
    }
    let worst = residuals.iter().map(|r| r.1).fold(0.0, f64::max);
    let pass = worst <= IDENTITY_TOLERANCE;
    let mut verdict = format!("Berezin exponent {}", fmt_num(fit.slope));
    if c.experiment.identity {
        verdict.push_str(&format!("; identity residual {}", fmt_num(worst)));
    }
    let outcome = Outcome { pass, verdict };
    out.text("berezin_profile.csv", &pairs_csv("delta,berezin", &samples))?;
    out.report(
        "berezin.json",
        &outcome,
        json!({
            "slope": fit.slope,
            "intercept": fit.intercept,
            "r_squared": fit.r_squared,
            "theta": c.experiment.theta,
            "predicted_exponent": predicted,
            "carleson": ber_c,
            "vanishing": ber_v,
            "identity_residuals": residuals,
            "identity_tolerance": IDENTITY_TOLERANCE,
        }),
    )?;
    out.plot(
        "berezin_profile.svg",
        "Berezin transform",
        "B mu",
        &[Series { label: "B mu".into(), points: &samples }],
    )?;
    Ok(outcome)
}

/// Relative multiplicity change allowed under sample doubling.
pub const MULTIPLICITY_STABILITY: f64 = 0.2;

fn cmd_lattice(c: &RunConfig, out: &Output) -> Result<Outcome> {
    let domain = c.domain()?;
    let mut lat = build_lattice(&domain, c.lattice.r, c.lattice.delta_min)?;
    let n = c.lattice.samples;
    let coverage = validate_covering(&lat, n, c.seed)?;
    let m = validate_multiplicity(&lat, n, c.seed)?;
    let m2 = validate_multiplicity(&lat, 2 * n, c.seed.wrapping_add(1))?;
    let change = (m2 as f64 - m as f64).abs() / m.max(1) as f64;
    let sep = min_separation(&lat);
    lat.multiplicity = Some(m.max(m2));
    let pass = coverage == 1.0 && m > 0 && change <= MULTIPLICITY_STABILITY;
    let outcome = Outcome {
        pass,
        verdict: format!(
            "lattice: {} centres, coverage {}, multiplicity {m} ({m2} with doubled samples)",
            lat.len(),
            fmt_num(coverage)
        ),
    };
    write_lattice(out, &lat)?;
    out.report(
        "lattice_report.json",
        &outcome,
        json!({
            "centres": lat.len(),
            "r": lat.r,
            "R": lat.big_r,
            "delta_min": lat.delta_min,
            "smallest_delta": lat.smallest_delta(),
            "samples": n,
            "coverage": coverage,
            "multiplicity": m,
            "multiplicity_doubled": m2,
            "multiplicity_change": change,
            "min_separation": sep,
        }),
    )?;
    Ok(outcome)
}

fn write_lattice(out: &Output, lat: &RLattice) -> Result<()> {
    let mut v = serde_json::from_str::<Value>(&lat.to_json()?).map_err(|e| LabError::Io(e.to_string()))?;
    if let Value::Object(m) = &mut v {
        m.insert("_config".into(), out.config.clone());
    }
    let s = serde_json::to_string(&v).map_err(|e| LabError::Io(e.to_string()))?;
    out.write("lattice.json", &(s + "\n"))
}

fn cmd_toeplitz_gain(c: &RunConfig, out: &Output) -> Result<Outcome> {
    let domain = c.domain()?;
    let e = &c.experiment;
    let rep = gain_experiment(e.eta, e.p, &domain, e.r_grid.as_deref(), &c.rule())?;
    let pass = rep.consistent();
    let flip = rep.flip_r.map_or("none".to_string(), fmt_num);
    let expected = rep.sharp_r.map_or("none".to_string(), fmt_num);
    let outcome = Outcome {
        pass,
        verdict: format!("toeplitz gain ({:?}): flip at r = {flip}, expected p + G = {expected}", rep.case),
    };
    out.text("gain_report.csv", &rep.to_csv())?;
    let details = serde_json::from_str::<Value>(&rep.to_json()?).map_err(|e| LabError::Io(e.to_string()))?;
    out.report("gain_report.json", &outcome, json!({ "report": details }))?;
    let pts: Vec<(f64, f64)> = rep
        .rows
        .iter()
        .filter_map(|r| r.max_ratio.map(|m| (r.r, m)))
        .filter(|p| p.0.is_finite())
        .collect();
    if out.plots {
        let svg = loglog_svg(
            "Toeplitz ratio sweep",
            "r",
            "max ratio",
            &[Series { label: "max ratio".into(), points: &pts }],
        );
        out.write("gain_report.svg", &format!("<!--\n{}-->\n{svg}", out.header.replace("--", "- -")))?;
    }
    Ok(outcome)
}

fn cmd_discrete(c: &RunConfig, out: &Output) -> Result<Outcome> {
    let domain = c.domain()?;
    let e = &c.experiment;
    let seq = match c.points()? {
        Some(pts) => SequenceFamily::new(pts, e.eps).map_err(|err| LabError::Config(format!("experiment.points: {err}")))?,
        None => generate_uniformly_discrete(&domain, e.eps, c.lattice.delta_min)?,
    };
    let mu: Measure = discrete_theta_measure(&seq, e.theta)?;
    let lat = build_lattice(&domain, c.lattice.r, c.lattice.delta_min)?;
    let prof = carleson_profile(&mu, &domain, &lat, e.theta)?;
    let geo_c = carleson_yes(prof.carleson_verdict(&c.analysis));
    let geo_v = vanishing_yes(prof.vanishing_verdict(DecadeStatistic::Max));
    let outcome = Outcome {
        pass: expectation_pass(c, geo_c, geo_v),
        verdict: carleson_label("Carleson", geo_c, geo_v),
    };
    out.text("discrete_profile.csv", &pairs_csv("delta,ratio", &prof.samples))?;
    out.report(
        "discrete.json",
        &outcome,
        json!({
            "points": seq.len(),
            "separation": seq.separation(),
            "theta": e.theta,
            "carleson": geo_c,
            "vanishing": geo_v,
            "sup_ratio": prof.sup_ratio,
            "decades": decades_json(&prof),
        }),
    )?;
    let (med, max) = decade_series(&prof);
    out.plot(
        "discrete_profile.svg",
        "Carleson ratio by decade",
        "ratio",
        &[
            Series { label: "median".into(), points: &med },
            Series { label: "max".into(), points: &max },
        ],
    )?;
    Ok(outcome)
}

/// Reports written by the other subcommands, in file-name order.
fn collect_reports(dir: &Path) -> Result<Vec<(String, Value)>> {
    let mut names: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| LabError::Config(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    names.sort();
    let mut out = Vec::new();
    for p in names {
        let Ok(text) = std::fs::read_to_string(&p) else { continue };
        let Ok(v) = serde_json::from_str::<Value>(&text) else { continue };
        let is_report = v.get("pass").is_some_and(Value::is_boolean)
            && v.get("command").and_then(Value::as_str).is_some_and(|c| c != "report");
        if is_report {
            let name = p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
            out.push((name, v));
        }
    }
    Ok(out)
}

fn cmd_report(c: &RunConfig, out: &Output) -> Result<Outcome> {
    let reports = collect_reports(&c.output_dir)?;
    if reports.is_empty() {
        return Err(LabError::Config(format!("no reports found in {}", c.output_dir.display())));
    }
    let mut text = String::from("file,command,pass,verdict\n");
    let mut entries = Vec::new();
    for (file, v) in &reports {
        let cmd = v["command"].as_str().unwrap_or("");
        let pass = v["pass"].as_bool().unwrap_or(false);
        let verdict = v["verdict"].as_str().unwrap_or("");
        text.push_str(&format!(
            "{},{},{},{}\n",
            crate::analysis::csv_field(file),
            cmd,
            pass,
            crate::analysis::csv_field(verdict)
        ));
        entries.push(json!({"file": file, "command": cmd, "pass": pass, "verdict": verdict}));
    }
    let failed = reports.iter().filter(|(_, v)| v["pass"] != Value::Bool(true)).count();
    let outcome = Outcome {
        pass: failed == 0,
        verdict: format!("report: {}/{} runs pass", reports.len() - failed, reports.len()),
    };
    out.text("summary.csv", &text)?;
    out.report("summary.json", &outcome, json!({ "runs": entries }))?;
    Ok(outcome)
}
