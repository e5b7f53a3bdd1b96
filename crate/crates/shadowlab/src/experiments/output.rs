//! File formats: orbit files, CSV tables, and the JSON sidecar.
//!
//! Every CSV has a header row naming each column. Orbit files use the
//! shared exchange format: a first line `dim=<1|2>`, then one point per
//! line with comma-separated coordinates. Floats print with Rust's
//! shortest round-trip formatting, so identical runs produce identical
//! bytes. The sidecar records what addressed a run (config hash, seed,
//! version) and deliberately nothing time-dependent.

use crate::error::{Error, Result};
use crate::phase_space::{canonicalize, PhasePoint};
use crate::measures::{EmpiricalMeasure, GridMeasure};
use crate::stationary::CrossValidation;
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{BirkhoffReport, ShadowReport, SimulateReport, SweepRow};

/// Serialize a point sequence in the orbit exchange format.
pub fn format_pseudo_orbit(points: &[PhasePoint]) -> String {
    let mut out = String::with_capacity(points.len() * 20 + 8);
    let dim = points.first().map_or(1, |p| p.dim());
    let _ = writeln!(out, "dim={dim}");
    for p in points {
        let coords: Vec<String> = p.coords().iter().map(|c| format!("{c}")).collect();
        let _ = writeln!(out, "{}", coords.join(","));
    }
    out
}

pub fn write_pseudo_orbit(path: &Path, points: &[PhasePoint]) -> Result<()> {
    fs::write(path, format_pseudo_orbit(points))?;
    Ok(())
}

/// Parse the orbit exchange format.
pub fn parse_pseudo_orbit(text: &str) -> Result<Vec<PhasePoint>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Usage("empty orbit file".into()))?
        .trim();
    let dim: usize = header
        .strip_prefix("dim=")
        .and_then(|d| d.parse().ok())
        .ok_or_else(|| Error::Usage(format!("orbit file must start with dim=<1|2>, got '{header}'")))?;
    if dim != 1 && dim != 2 {
        return Err(Error::Usage(format!("unsupported dimension {dim}")));
    }
    let mut points = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let coords: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|t| t.trim().parse::<f64>()).collect();
        let coords = coords.map_err(|e| {
            Error::Usage(format!("orbit file line {}: {e}", lineno + 2))
        })?;
        if coords.len() != dim {
            return Err(Error::Usage(format!(
                "orbit file line {}: expected {dim} coordinates, got {}",
                lineno + 2,
                coords.len()
            )));
        }
        points.push(canonicalize(&coords)?);
    }
    if points.is_empty() {
        return Err(Error::Usage("orbit file has no points".into()));
    }
    Ok(points)
}

pub fn read_pseudo_orbit(path: &Path) -> Result<Vec<PhasePoint>> {
    parse_pseudo_orbit(&fs::read_to_string(path)?)
}

/// Atom rows `(coords..., weight)`.
pub fn write_empirical_csv(path: &Path, m: &EmpiricalMeasure) -> Result<()> {
    let mut out = String::new();
    let header = if m.space().dimension() == 1 {
        "x,weight"
    } else {
        "x,y,weight"
    };
    let _ = writeln!(out, "{header}");
    for (p, w) in m.atoms() {
        let coords: Vec<String> = p.coords().iter().map(|c| format!("{c}")).collect();
        let _ = writeln!(out, "{},{w}", coords.join(","));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Grid rows `(cell_index, mass)`.
pub fn write_grid_csv(path: &Path, g: &GridMeasure) -> Result<()> {
    let mut out = String::from("cell_index,mass\n");
    for (i, m) in g.masses().iter().enumerate() {
        let _ = writeln!(out, "{i},{m}");
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_simulate_csv(path: &Path, report: &SimulateReport) -> Result<()> {
    let mut out = String::from("replica,stream,points,epsilon,valid,max_gap,worst_index\n");
    for (r, (orbit, v)) in report
        .orbits
        .iter()
        .zip(&report.verifications)
        .enumerate()
    {
        let _ = writeln!(
            out,
            "{r},{},{},{},{},{},{}",
            orbit.stream,
            orbit.points.len(),
            report.epsilon,
            v.valid,
            v.max_gap,
            v.worst_index
        );
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_certificate_csv(path: &Path, report: &ShadowReport) -> Result<()> {
    let mut out = String::from(
        "points,chain_epsilon,max_gap,shadow_epsilon,shadow_distance,consistency,pass,degraded\n",
    );
    let c = &report.certificate;
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{}",
        report.pseudo.len(),
        report.chain_epsilon,
        report.max_gap,
        report.shadow_epsilon,
        c.shadow_distance,
        c.consistency,
        c.pass,
        c.degraded
    );
    fs::write(path, out)?;
    Ok(())
}

pub fn write_step_bounds_csv(path: &Path, report: &ShadowReport) -> Result<()> {
    let mut out = String::from("observable,lip,lhs,rhs,ok\n");
    for row in &report.step_bounds {
        let _ = writeln!(out, "{},{},{},{},{}", row.label, row.lip, row.lhs, row.rhs, row.ok);
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_crossval_csv(path: &Path, cv: &CrossValidation) -> Result<()> {
    let mut out = String::from("stream,x0,w1,max_normalized_gap\n");
    for seed in &cv.per_seed {
        let coords: Vec<String> = seed.x0.coords().iter().map(|c| format!("{c}")).collect();
        let w1 = seed.w1.map_or(String::new(), |v| format!("{v}"));
        let _ = writeln!(
            out,
            "{},{},{},{}",
            seed.stream,
            coords.join(";"),
            w1,
            seed.max_normalized_gap
        );
    }
    fs::write(path, out)?;
    Ok(())
}

/// The sweep table: one row per noise level, wide columns carrying every
/// observable's gap and limit so the bound flag is recomputable from the
/// row alone.
pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    if rows.is_empty() {
        fs::write(path, "epsilon\n")?;
        return Ok(());
    }
    let mut header = String::from(
        "epsilon,delta,w1,max_normalized_gap,bound_satisfied,replicas,\
         mc_metric_median,mc_budget,mc_within_budget",
    );
    for o in &rows[0].observables {
        let _ = write!(header, ",gap:{},limit:{}", o.label, o.label);
    }
    let mut out = header;
    out.push('\n');
    for row in rows {
        let w1 = row.w1.map_or(String::new(), |v| format!("{v}"));
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            row.epsilon,
            row.delta,
            w1,
            row.max_normalized_gap,
            row.bound_satisfied,
            row.replicas,
            row.mc_metric_median,
            row.mc_budget,
            row.mc_within_budget
        );
        for o in &row.observables {
            let _ = write!(out, ",{},{}", o.gap, o.limit);
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_birkhoff_gaps_csv(path: &Path, report: &BirkhoffReport) -> Result<()> {
    let mut header = String::from("n,det_rms,rand_rms");
    for label in &report.labels {
        let _ = write!(header, ",det_med:{label},rand_med:{label}");
    }
    let mut out = header;
    out.push('\n');
    for (ni, &n) in report.schedule.iter().enumerate() {
        let _ = write!(out, "{n},{},{}", report.det_rms[ni], report.rand_rms[ni]);
        for oi in 0..report.labels.len() {
            let _ = write!(out, ",{},{}", report.det_median[ni][oi], report.rand_median[ni][oi]);
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_birkhoff_n0_csv(path: &Path, report: &BirkhoffReport) -> Result<()> {
    let mut out = String::from("kind,epsilon,observable,n0\n");
    for row in &report.n0_rows {
        let n0 = row.n0.map_or(String::new(), |n| n.to_string());
        let _ = writeln!(out, "{},{},{},{n0}", row.kind, row.epsilon, row.label);
    }
    fs::write(path, out)?;
    Ok(())
}

/// Sidecar recording what addressed a run. Field order is fixed by the
/// struct, so serialization is deterministic.
#[derive(Debug, Serialize)]
pub struct MetaSidecar {
    pub command: String,
    pub config_path: String,
    pub config_sha256: String,
    pub master_seed: u64,
    pub seed_overridden: bool,
    pub package: &'static str,
    pub version: &'static str,
    pub warnings: Vec<String>,
    pub summary: serde_json::Value,
}

impl MetaSidecar {
    pub fn new(command: &str, config_path: &str, config_sha256: &str, master_seed: u64, seed_overridden: bool) -> Self {
        MetaSidecar {
            command: command.to_string(),
            config_path: config_path.to_string(),
            config_sha256: config_sha256.to_string(),
            master_seed,
            seed_overridden,
            package: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            warnings: Vec::new(),
            summary: serde_json::Value::Null,
        }
    }
}

pub fn write_meta(path: &Path, meta: &MetaSidecar) -> Result<()> {
    let text = serde_json::to_string_pretty(meta)
        .map_err(|e| Error::Numerical(format!("sidecar serialization: {e}")))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// A ready-to-run matplotlib script for the CSVs a subcommand emits.
/// Plotting itself stays outside this tool.
pub fn plot_script(command: &str) -> String {
    let body = match command {
        "sweep" => {
            r#"import csv, math
import matplotlib.pyplot as plt

eps, w1 = [], []
with open("sweep.csv") as fh:
    for row in csv.DictReader(fh):
        eps.append(float(row["epsilon"]))
        if row["w1"]:
            w1.append(float(row["w1"]))

fig, ax = plt.subplots()
if w1:
    ax.loglog(eps, w1, "o-")
ax.set_xlabel("noise radius")
ax.set_ylabel("W1 to zero-noise reference")
ax.set_title("stationary-measure convergence")
fig.savefig("sweep.png", dpi=150)
print("wrote sweep.png")
"#
        }
        "birkhoff" => {
            r#"import csv
import matplotlib.pyplot as plt

n, det, rnd = [], [], []
with open("birkhoff_gaps.csv") as fh:
    for row in csv.DictReader(fh):
        n.append(int(row["n"]))
        det.append(float(row["det_rms"]))
        rnd.append(float(row["rand_rms"]))

fig, ax = plt.subplots()
ax.loglog(n, det, "o-", label="deterministic")
ax.loglog(n, rnd, "s-", label="random")
ax.loglog(n, [det[0] * (n[0] / x) ** 0.5 for x in n], "k--", label="n^-1/2")
ax.set_xlabel("orbit length")
ax.set_ylabel("rms observable gap")
ax.legend()
fig.savefig("birkhoff.png", dpi=150)
print("wrote birkhoff.png")
"#
        }
        "stationary" => {
            r#"import csv
import matplotlib.pyplot as plt

idx, mass = [], []
with open("ulam_density.csv") as fh:
    for row in csv.DictReader(fh):
        idx.append(int(row["cell_index"]))
        mass.append(float(row["mass"]))

fig, ax = plt.subplots()
ax.plot(idx, [m * len(mass) for m in mass])
ax.set_xlabel("cell index")
ax.set_ylabel("density")
fig.savefig("stationary.png", dpi=150)
print("wrote stationary.png")
"#
        }
        _ => {
            r#"print("no plot defined for this subcommand")
"#
        }
    };
    format!("#!/usr/bin/env python3\n{body}")
}
