//! Command-line driver for the laboratory.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 numerical
//! failure (non-convergence, failed shadowing certificate), 3 violated
//! theorem-level bound.

use clap::{Args, Parser, Subcommand};
use shadowlab::error::Result;
use shadowlab::experiments::output::{self, MetaSidecar};
use shadowlab::experiments::{
    run_birkhoff, run_shadow_demo, run_simulate, run_stationary, run_sweep, shadow_pseudo_orbit,
    ExperimentConfig, SweepRow,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "shadowlab",
    version,
    about = "Shadowing, random perturbations, and stationary measures of chaotic maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate random orbits of the perturbed chain and verify the
    /// pseudo-orbit contract.
    Simulate(CommonArgs),
    /// Shadow a pseudo-orbit (from --input, or freshly generated) and
    /// certify the result.
    Shadow {
        #[command(flatten)]
        common: CommonArgs,
        /// Pseudo-orbit file (first line `dim=<1|2>`, then one
        /// comma-separated point per line). Generated from the config's
        /// chain when absent.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Compute the stationary measure two ways and cross-validate.
    Stationary(CommonArgs),
    /// Sweep the configured noise radii down toward zero.
    Sweep(CommonArgs),
    /// Convergence of time averages with orbit length.
    Birkhoff(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit a ready-to-run plotting script next to the CSVs.
    #[arg(long)]
    plot_script: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

struct Prepared {
    cfg: ExperimentConfig,
    meta: MetaSidecar,
    out_dir: PathBuf,
}

fn prepare(command: &str, args: &CommonArgs) -> Result<Prepared> {
    let (mut cfg, hash) = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    std::fs::create_dir_all(&cfg.out_dir)?;
    let meta = MetaSidecar::new(
        command,
        &args.config.display().to_string(),
        &hash,
        cfg.master_seed,
        args.seed.is_some(),
    );
    let out_dir = cfg.out_dir.clone();
    Ok(Prepared { cfg, meta, out_dir })
}

fn finish(
    out_dir: &Path,
    mut meta: MetaSidecar,
    summary: serde_json::Value,
    plot: Option<&str>,
) -> Result<()> {
    meta.summary = summary;
    output::write_meta(&out_dir.join("meta.json"), &meta)?;
    if let Some(command) = plot {
        std::fs::write(out_dir.join("plot.py"), output::plot_script(command))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate(args) => {
            let Prepared { cfg, meta, out_dir } = prepare("simulate", &args)?;
            let report = run_simulate(&cfg)?;
            for (r, orbit) in report.orbits.iter().enumerate() {
                output::write_pseudo_orbit(
                    &out_dir.join(format!("orbit_{r:03}.csv")),
                    &orbit.points,
                )?;
            }
            output::write_simulate_csv(&out_dir.join("simulate.csv"), &report)?;
            let all_valid = report.verifications.iter().all(|v| v.valid);
            let max_gap = report
                .verifications
                .iter()
                .map(|v| v.max_gap)
                .fold(0.0, f64::max);
            finish(
                &out_dir,
                meta,
                serde_json::json!({
                    "epsilon": report.epsilon,
                    "replicas": report.orbits.len(),
                    "all_valid": all_valid,
                    "max_gap": max_gap,
                }),
                None,
            )?;
            println!(
                "simulate: {} orbit(s) of length {} at epsilon={}; max gap {}; valid: {}",
                report.orbits.len(),
                cfg.orbit_len,
                report.epsilon,
                max_gap,
                all_valid
            );
            Ok(if all_valid {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }

        Command::Shadow { common, input } => {
            let Prepared { cfg, meta, out_dir } = prepare("shadow", &common)?;
            let report = match &input {
                Some(path) => {
                    let pseudo = output::read_pseudo_orbit(path)?;
                    shadow_pseudo_orbit(&cfg, pseudo, 0.0, false)?
                }
                None => run_shadow_demo(&cfg)?,
            };
            if report.generated {
                output::write_pseudo_orbit(&out_dir.join("pseudo_orbit.csv"), &report.pseudo)?;
            }
            output::write_pseudo_orbit(&out_dir.join("shadow_orbit.csv"), &report.shadow.points)?;
            output::write_certificate_csv(&out_dir.join("certificate.csv"), &report)?;
            output::write_step_bounds_csv(&out_dir.join("step_bounds.csv"), &report)?;
            let cert = report.certificate;
            finish(
                &out_dir,
                meta,
                serde_json::json!({
                    "points": report.pseudo.len(),
                    "max_gap": report.max_gap,
                    "shadow_epsilon": report.shadow_epsilon,
                    "shadow_distance": cert.shadow_distance,
                    "consistency": cert.consistency,
                    "certificate_pass": cert.pass,
                    "bounds_ok": report.all_bounds_ok(),
                }),
                None,
            )?;
            println!(
                "shadow: {} points, max gap {}, shadow distance {}, consistency {}, \
                 certificate pass: {}, observable bounds ok: {}",
                report.pseudo.len(),
                report.max_gap,
                cert.shadow_distance,
                cert.consistency,
                cert.pass,
                report.all_bounds_ok()
            );
            Ok(if !cert.pass {
                ExitCode::from(2)
            } else if !report.all_bounds_ok() {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            })
        }

        Command::Stationary(args) => {
            let Prepared { cfg, mut meta, out_dir } = prepare("stationary", &args)?;
            let report = run_stationary(&cfg)?;
            let cv = &report.crossval;
            meta.warnings = cv.warnings.clone();
            output::write_grid_csv(&out_dir.join("ulam_density.csv"), &cv.ulam.density)?;
            output::write_crossval_csv(&out_dir.join("crossval.csv"), cv)?;
            finish(
                &out_dir,
                meta,
                serde_json::json!({
                    "epsilon": report.epsilon,
                    "cells": cfg.ulam_cells,
                    "iterations": cv.ulam.iterations,
                    "residual": cv.ulam.residual,
                    "w1_median": cv.w1_median,
                    "gap_median": cv.gap_median,
                    "budget": cv.budget,
                    "within_budget": cv.within_budget,
                }),
                args.plot_script.then_some("stationary"),
            )?;
            println!(
                "stationary: epsilon={}, {} cells, {} iterations, residual {}; \
                 median discrepancy {} (budget {}), within budget: {}",
                report.epsilon,
                cfg.ulam_cells,
                cv.ulam.iterations,
                cv.ulam.residual,
                cv.w1_median.unwrap_or(cv.gap_median),
                cv.budget,
                cv.within_budget
            );
            Ok(if cv.within_budget {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }

        Command::Sweep(args) => {
            let Prepared { cfg, meta, out_dir } = prepare("sweep", &args)?;
            // Rewrite the table after every finished row so an aborted run
            // still leaves the partial table.
            let csv_path = out_dir.join("sweep.csv");
            let mut written: Vec<SweepRow> = Vec::new();
            let rows = run_sweep(&cfg, |row| {
                written.push(row.clone());
                let _ = output::write_sweep_csv(&csv_path, &written);
                println!(
                    "sweep: epsilon={} delta={} w1={:?} max_norm_gap={} bound_ok={} mc_ok={}",
                    row.epsilon,
                    row.delta,
                    row.w1,
                    row.max_normalized_gap,
                    row.bound_satisfied,
                    row.mc_within_budget
                );
            })?;
            output::write_sweep_csv(&csv_path, &rows)?;
            let all_bounds = rows.iter().all(|r| r.bound_satisfied);
            let all_mc = rows.iter().all(|r| r.mc_within_budget);
            finish(
                &out_dir,
                meta,
                serde_json::json!({
                    "rows": rows.len(),
                    "all_bounds_satisfied": all_bounds,
                    "all_mc_within_budget": all_mc,
                    "first_w1": rows.first().and_then(|r| r.w1),
                    "last_w1": rows.last().and_then(|r| r.w1),
                }),
                args.plot_script.then_some("sweep"),
            )?;
            println!(
                "sweep: {} rows; bounds satisfied: {}; estimators agree: {}",
                rows.len(),
                all_bounds,
                all_mc
            );
            Ok(if !all_bounds {
                ExitCode::from(3)
            } else if !all_mc {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            })
        }

        Command::Birkhoff(args) => {
            let Prepared { cfg, meta, out_dir } = prepare("birkhoff", &args)?;
            let report = run_birkhoff(&cfg)?;
            output::write_birkhoff_gaps_csv(&out_dir.join("birkhoff_gaps.csv"), &report)?;
            output::write_birkhoff_n0_csv(&out_dir.join("birkhoff_n0.csv"), &report)?;
            finish(
                &out_dir,
                meta,
                serde_json::json!({
                    "schedule": report.schedule,
                    "det_slope": report.det_slope,
                    "rand_slope": report.rand_slope,
                    "replicas": cfg.replicas,
                }),
                args.plot_script.then_some("birkhoff"),
            )?;
            println!(
                "birkhoff: n from {} to {}; log-log slopes: deterministic {}, random {}",
                report.schedule.first().unwrap(),
                report.schedule.last().unwrap(),
                report.det_slope,
                report.rand_slope
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}
