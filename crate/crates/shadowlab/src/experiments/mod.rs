//! Experiment orchestration: the runs behind each CLI subcommand.
//!
//! Every run is deterministic given `(config, master seed)`. Random work
//! units draw from ChaCha streams with a fixed allocation:
//!
//! * `simulate` / `stationary`: replica `r` uses stream `r`;
//! * `shadow` (self-generated orbit): stream 0;
//! * `sweep`: row `r`, replica `s` uses stream `(r << 32) | s`;
//! * `birkhoff`: deterministic-orbit seed `s` uses stream `s`, the
//!   random-orbit counterpart uses stream `(1 << 32) | s`.
//!
//! Run functions return report structs; writing CSV/sidecar files and
//! mapping failures to process exit codes is the binary's job, so a
//! failing certificate or bound still leaves its artifacts on disk.

pub mod config;
pub mod output;

pub use config::ExperimentConfig;

use crate::dynamics::{MapSpec, ReferenceMeasure, TypicalOrbitStream};
use crate::error::{Error, Result};
use crate::measures::{dictionary_gap, integrate, wasserstein1_circle, MeasureView, Observable};
use crate::noise::{
    orbit_rng, random_orbit_from_stream, random_point, sample_step, verify_pseudo_orbit,
    PseudoOrbitReport, RandomOrbit,
};
use crate::numerics::{linear_fit, KahanSum};
use crate::phase_space::{PhasePoint, Space};
use crate::shadowing::{certify, shadow, shadowing_modulus, Certificate, ShadowOrbit};
use crate::stationary::{
    build_ulam, cross_validate, stationary_distribution, zero_noise_acim, CrossValidation,
    StationaryResult, StationarySetup,
};
use rayon::prelude::*;

/// Stream identifiers for the units of random work.
pub mod streams {
    pub fn replica(r: usize) -> u64 {
        r as u64
    }

    pub fn sweep(row: usize, replica: usize) -> u64 {
        ((row as u64) << 32) | replica as u64
    }

    pub fn birkhoff_deterministic(seed_index: usize) -> u64 {
        seed_index as u64
    }

    pub fn birkhoff_random(seed_index: usize) -> u64 {
        (1u64 << 32) | seed_index as u64
    }
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

/// Random orbits of the perturbed chain, each checked against the
/// pseudo-orbit contract at `delta = epsilon`.
#[derive(Clone, Debug)]
pub struct SimulateReport {
    pub epsilon: f64,
    pub orbits: Vec<RandomOrbit>,
    pub verifications: Vec<PseudoOrbitReport>,
}

/// Generate `replicas` random orbits at the largest configured radius and
/// verify each is an `epsilon`-pseudo-orbit.
pub fn run_simulate(cfg: &ExperimentConfig) -> Result<SimulateReport> {
    let epsilon = cfg.epsilons[0];
    let kernel = cfg.kernel(epsilon)?;
    let orbits: Result<Vec<RandomOrbit>> = (0..cfg.replicas)
        .into_par_iter()
        .map(|r| {
            random_orbit_from_stream(
                &kernel,
                &cfg.map,
                cfg.orbit_len,
                cfg.master_seed,
                streams::replica(r),
            )
        })
        .collect();
    let orbits = orbits?;
    let verifications = orbits
        .iter()
        .map(|o| verify_pseudo_orbit(&cfg.map, &o.points, epsilon))
        .collect::<Result<Vec<_>>>()?;
    Ok(SimulateReport {
        epsilon,
        orbits,
        verifications,
    })
}

// ---------------------------------------------------------------------------
// shadow
// ---------------------------------------------------------------------------

/// One observable's time-average discrepancy between the shadow orbit and
/// the pseudo-orbit, against its Lipschitz bound.
#[derive(Clone, Debug)]
pub struct StepBoundRow {
    pub label: String,
    pub lip: f64,
    /// `|mean phi(shadow) - mean phi(pseudo)|`.
    pub lhs: f64,
    /// `lip * shadow_distance + 1e-9`.
    pub rhs: f64,
    pub ok: bool,
}

/// Shadowing of one pseudo-orbit: the solver output, its certificate, and
/// the per-observable average bounds.
#[derive(Clone, Debug)]
pub struct ShadowReport {
    /// Noise radius of the generating chain (0 when read from a file).
    pub chain_epsilon: f64,
    /// Accuracy at which the certificate is checked: the modulus inverse
    /// of the measured pseudo-orbit error.
    pub shadow_epsilon: f64,
    /// Measured per-step error of the input.
    pub max_gap: f64,
    pub pseudo: Vec<PhasePoint>,
    pub shadow: ShadowOrbit,
    pub certificate: Certificate,
    pub step_bounds: Vec<StepBoundRow>,
    pub generated: bool,
}

impl ShadowReport {
    pub fn all_bounds_ok(&self) -> bool {
        self.step_bounds.iter().all(|r| r.ok)
    }
}

/// Generate a random orbit at the largest configured radius and shadow it.
pub fn run_shadow_demo(cfg: &ExperimentConfig) -> Result<ShadowReport> {
    let epsilon = cfg.epsilons[0];
    let kernel = cfg.kernel(epsilon)?;
    let orbit = random_orbit_from_stream(&kernel, &cfg.map, cfg.orbit_len, cfg.master_seed, 0)?;
    shadow_pseudo_orbit(cfg, orbit.points, epsilon, true)
}

/// Shadow a given pseudo-orbit (e.g. read from a file) and evaluate the
/// per-observable average bounds.
pub fn shadow_pseudo_orbit(
    cfg: &ExperimentConfig,
    pseudo: Vec<PhasePoint>,
    chain_epsilon: f64,
    generated: bool,
) -> Result<ShadowReport> {
    let max_gap = verify_pseudo_orbit(&cfg.map, &pseudo, f64::MAX)?.max_gap;
    let modulus = shadowing_modulus(&cfg.map);
    // Accuracy the modulus guarantees for this pseudo-orbit error.
    let shadow_epsilon = if max_gap > 0.0 {
        max_gap / modulus.rate()
    } else {
        1e-12
    };
    let shadow_orbit = shadow(&cfg.map, &pseudo)?;
    let certificate = certify(&cfg.map, &pseudo, &shadow_orbit, shadow_epsilon)?;

    let step_bounds = step_bound_rows(
        &cfg.dictionary(),
        &shadow_orbit.points,
        &pseudo,
        certificate.shadow_distance,
    )?;
    Ok(ShadowReport {
        chain_epsilon,
        shadow_epsilon,
        max_gap,
        pseudo,
        shadow: shadow_orbit,
        certificate,
        step_bounds,
        generated,
    })
}

fn step_bound_rows(
    dictionary: &[Observable],
    shadow_points: &[PhasePoint],
    pseudo: &[PhasePoint],
    shadow_distance: f64,
) -> Result<Vec<StepBoundRow>> {
    dictionary
        .iter()
        .map(|phi| {
            let mut a = KahanSum::new();
            let mut b = KahanSum::new();
            for p in shadow_points {
                a.add(phi.eval(p)?);
            }
            for p in pseudo {
                b.add(phi.eval(p)?);
            }
            let n = shadow_points.len() as f64;
            let lhs = (a.value() / n - b.value() / n).abs();
            let rhs = phi.lip_const() * shadow_distance + 1e-9;
            Ok(StepBoundRow {
                label: phi.label().to_string(),
                lip: phi.lip_const(),
                lhs,
                rhs,
                ok: lhs <= rhs,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// stationary
// ---------------------------------------------------------------------------

/// Stationary-measure computation at the largest configured radius.
#[derive(Clone, Debug)]
pub struct StationaryReport {
    pub epsilon: f64,
    pub crossval: CrossValidation,
}

pub fn run_stationary(cfg: &ExperimentConfig) -> Result<StationaryReport> {
    let epsilon = cfg.epsilons[0];
    let setup = StationarySetup {
        map: cfg.map,
        kernel: cfg.kernel(epsilon)?,
        cells_per_dim: cfg.ulam_cells,
        quadrature: cfg.quadrature,
        burn_in: cfg.burn_in,
        samples: cfg.orbit_len,
        master_seed: cfg.master_seed,
        stream_base: 0,
        replicas: cfg.replicas,
        dict_max_freq: cfg.dict_max_freq,
        tol: cfg.power_tol,
        max_iter: cfg.power_max_iter,
    };
    Ok(StationaryReport {
        epsilon,
        crossval: cross_validate(&setup)?,
    })
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

/// One observable's stationary-measure gap against its theorem limit.
#[derive(Clone, Debug)]
pub struct SweepObservable {
    pub label: String,
    /// `|integral against the reference - integral at eps|`.
    pub gap: f64,
    /// `(lip + 1) eps + delta(eps)` plus the declared numerical slack.
    pub limit: f64,
}

/// One noise level of the sweep.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub epsilon: f64,
    /// Shadowing modulus at this radius.
    pub delta: f64,
    /// Transport distance to the zero-noise reference (circle only).
    pub w1: Option<f64>,
    pub max_normalized_gap: f64,
    /// Every observable gap within its limit.
    pub bound_satisfied: bool,
    pub replicas: usize,
    /// Median two-estimator discrepancy (W1 on the circle, dictionary gap
    /// on the torus) and its budget.
    pub mc_metric_median: f64,
    pub mc_budget: f64,
    pub mc_within_budget: bool,
    pub observables: Vec<SweepObservable>,
}

/// Sweep the configured radii in descending order. Each finished row is
/// handed to `on_row` before the next starts, so a failing row still
/// leaves the partial table with the caller.
pub fn run_sweep(
    cfg: &ExperimentConfig,
    mut on_row: impl FnMut(&SweepRow),
) -> Result<Vec<SweepRow>> {
    let reference = zero_noise_acim(&cfg.map, cfg.ulam_cells, cfg.reference_quadrature)?;
    let dictionary = cfg.dictionary();
    let mut rows = Vec::with_capacity(cfg.epsilons.len());
    for (r, &epsilon) in cfg.epsilons.iter().enumerate() {
        let row = sweep_row(cfg, r, epsilon, &reference, &dictionary)?;
        on_row(&row);
        rows.push(row);
    }
    Ok(rows)
}

fn sweep_row(
    cfg: &ExperimentConfig,
    row_index: usize,
    epsilon: f64,
    reference: &StationaryResult,
    dictionary: &[Observable],
) -> Result<SweepRow> {
    let setup = StationarySetup {
        map: cfg.map,
        kernel: cfg.kernel(epsilon)?,
        cells_per_dim: cfg.ulam_cells,
        quadrature: cfg.quadrature,
        burn_in: cfg.burn_in,
        samples: cfg.orbit_len,
        master_seed: cfg.master_seed,
        stream_base: streams::sweep(row_index, 0),
        replicas: cfg.replicas,
        dict_max_freq: cfg.dict_max_freq,
        tol: cfg.power_tol,
        max_iter: cfg.power_max_iter,
    };
    let crossval = cross_validate(&setup)?;
    let stationary = &crossval.ulam.density;

    let w1 = match cfg.map.space() {
        Space::Circle => Some(wasserstein1_circle(stationary, &reference.density)?),
        Space::Torus => None,
    };
    let delta = shadowing_modulus(&cfg.map).delta(epsilon);
    let gaps = dictionary_gap(stationary, &reference.density, dictionary)?;

    // Slack: 1e-6 plus both grid integrations' worst-case midpoint error
    // (lip * cell_width / 2 each).
    let cell_width = 1.0 / cfg.ulam_cells as f64;
    let observables: Vec<SweepObservable> = gaps
        .per_observable
        .iter()
        .map(|g| {
            let slack = 1e-6 + g.lip * cell_width;
            SweepObservable {
                label: g.label.clone(),
                gap: g.raw,
                limit: (g.lip + 1.0) * epsilon + delta + slack,
            }
        })
        .collect();
    let bound_satisfied = observables.iter().all(|o| o.gap <= o.limit);

    Ok(SweepRow {
        epsilon,
        delta,
        w1,
        max_normalized_gap: gaps.max_normalized,
        bound_satisfied,
        replicas: cfg.replicas,
        mc_metric_median: crossval.w1_median.unwrap_or(crossval.gap_median),
        mc_budget: crossval.budget,
        mc_within_budget: crossval.within_budget,
        observables,
    })
}

// ---------------------------------------------------------------------------
// birkhoff
// ---------------------------------------------------------------------------

/// Convergence study of time averages toward their space averages.
#[derive(Clone, Debug)]
pub struct BirkhoffReport {
    /// Orbit lengths, ascending, doubling up to the configured length.
    pub schedule: Vec<usize>,
    pub labels: Vec<String>,
    /// Per schedule point: rms gap over replicas and non-constant
    /// observables, for deterministic orbits and random orbits.
    pub det_rms: Vec<f64>,
    pub rand_rms: Vec<f64>,
    /// Median over replicas, per schedule point and observable.
    pub det_median: Vec<Vec<f64>>,
    pub rand_median: Vec<Vec<f64>>,
    /// Log-log slopes of the rms gap against n.
    pub det_slope: f64,
    pub rand_slope: f64,
    /// Empirical first length at which the median gap drops to each
    /// configured accuracy.
    pub n0_rows: Vec<N0Row>,
}

#[derive(Clone, Debug)]
pub struct N0Row {
    pub kind: &'static str,
    pub epsilon: f64,
    pub label: String,
    pub n0: Option<usize>,
}

/// Doubling schedule of orbit lengths ending at the configured length.
fn birkhoff_schedule(orbit_len: usize) -> Vec<usize> {
    let mut schedule = vec![orbit_len];
    while schedule.len() < 8 && *schedule.last().unwrap() / 2 >= 1_000 {
        schedule.push(schedule.last().unwrap() / 2);
    }
    schedule.reverse();
    schedule
}

/// Running averages of each observable along a point stream, snapshotted
/// at the scheduled lengths (average over the first `n + 1` points).
fn scheduled_averages(
    phis: &[Observable],
    schedule: &[usize],
    mut next_point: impl FnMut() -> PhasePoint,
) -> Vec<Vec<f64>> {
    let mut sums: Vec<KahanSum> = vec![KahanSum::new(); phis.len()];
    let mut out = Vec::with_capacity(schedule.len());
    let mut consumed = 0usize;
    for &n in schedule {
        while consumed <= n {
            let p = next_point();
            for (phi, sum) in phis.iter().zip(&mut sums) {
                sum.add(phi.eval_unchecked(&p));
            }
            consumed += 1;
        }
        out.push(sums.iter().map(|s| s.value() / (n + 1) as f64).collect());
    }
    out
}

pub fn run_birkhoff(cfg: &ExperimentConfig) -> Result<BirkhoffReport> {
    let schedule = birkhoff_schedule(cfg.orbit_len);
    let dictionary = cfg.dictionary();
    let labels: Vec<String> = dictionary.iter().map(|p| p.label().to_string()).collect();
    let epsilon = cfg.epsilons[0];
    let kernel = cfg.kernel(epsilon)?;

    // Space averages: exact Lebesgue integrals where Lebesgue is the
    // invariant reference (linear and cat families), the zero-noise grid
    // density for the nonlinear family; the chain compares against the
    // discretized stationary density at this radius.
    let det_reference: Vec<f64> = match cfg.map {
        MapSpec::NonlinearExpanding { .. } => {
            let acim = zero_noise_acim(&cfg.map, cfg.ulam_cells, cfg.reference_quadrature)?;
            let reference = ReferenceMeasure::UlamAcim(acim.density);
            dictionary
                .iter()
                .map(|phi| integrate(&reference, phi))
                .collect::<Result<_>>()?
        }
        _ => {
            let reference = ReferenceMeasure::Lebesgue(cfg.map.space());
            dictionary
                .iter()
                .map(|phi| integrate(&reference, phi))
                .collect::<Result<_>>()?
        }
    };
    let rand_reference: Vec<f64> = {
        let op = build_ulam(&cfg.map, &kernel, cfg.ulam_cells, cfg.quadrature)?;
        let st = stationary_distribution(&op, cfg.power_tol, cfg.power_max_iter)?;
        dictionary
            .iter()
            .map(|phi| integrate(MeasureView::Grid(&st.density), phi))
            .collect::<Result<_>>()?
    };

    // gaps[replica] = (deterministic, random), each [schedule][observable].
    let gaps: Result<Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>)>> = (0..cfg.replicas)
        .into_par_iter()
        .map(|s| {
            let det_avgs = match cfg.map {
                MapSpec::LinearExpanding { .. } => {
                    let rng = orbit_rng(cfg.master_seed, streams::birkhoff_deterministic(s));
                    let mut stream = TypicalOrbitStream::new(&cfg.map, rng)?;
                    scheduled_averages(&dictionary, &schedule, || {
                        let p = stream.current();
                        stream.advance();
                        p
                    })
                }
                _ => {
                    let mut rng = orbit_rng(cfg.master_seed, streams::birkhoff_deterministic(s));
                    let mut z = random_point(cfg.map.space(), &mut rng);
                    let mut first = true;
                    scheduled_averages(&dictionary, &schedule, || {
                        if first {
                            first = false;
                        } else {
                            z = cfg.map.apply(&z);
                        }
                        z
                    })
                }
            };
            let rand_avgs = {
                let mut rng = orbit_rng(cfg.master_seed, streams::birkhoff_random(s));
                let mut x = random_point(cfg.map.space(), &mut rng);
                let mut first = true;
                let mut sample_err = Ok(());
                let avgs = scheduled_averages(&dictionary, &schedule, || {
                    if first {
                        first = false;
                    } else {
                        match sample_step(&kernel, &cfg.map, &x, &mut rng) {
                            Ok(next) => x = next,
                            Err(e) => {
                                if sample_err.is_ok() {
                                    sample_err = Err(e);
                                }
                            }
                        }
                    }
                    x
                });
                sample_err?;
                avgs
            };
            let to_gaps = |avgs: Vec<Vec<f64>>, reference: &[f64]| {
                avgs.into_iter()
                    .map(|row| {
                        row.into_iter()
                            .zip(reference)
                            .map(|(a, r)| (a - r).abs())
                            .collect::<Vec<f64>>()
                    })
                    .collect::<Vec<_>>()
            };
            Ok((
                to_gaps(det_avgs, &det_reference),
                to_gaps(rand_avgs, &rand_reference),
            ))
        })
        .collect();
    let gaps = gaps?;

    let nonconstant: Vec<usize> = dictionary
        .iter()
        .enumerate()
        .filter(|(_, phi)| phi.lip_const() > 0.0)
        .map(|(i, _)| i)
        .collect();
    if nonconstant.is_empty() {
        return Err(Error::Usage(
            "the dictionary needs at least one non-constant observable".into(),
        ));
    }

    let rms_of = |pick: &dyn Fn(&(Vec<Vec<f64>>, Vec<Vec<f64>>)) -> &Vec<Vec<f64>>| {
        (0..schedule.len())
            .map(|ni| {
                let mut sq = 0.0;
                let mut count = 0usize;
                for g in &gaps {
                    for &oi in &nonconstant {
                        let v = pick(g)[ni][oi];
                        sq += v * v;
                        count += 1;
                    }
                }
                (sq / count as f64).sqrt()
            })
            .collect::<Vec<f64>>()
    };
    let det_rms = rms_of(&|g| &g.0);
    let rand_rms = rms_of(&|g| &g.1);

    let median_of = |pick: &dyn Fn(&(Vec<Vec<f64>>, Vec<Vec<f64>>)) -> &Vec<Vec<f64>>| {
        (0..schedule.len())
            .map(|ni| {
                (0..dictionary.len())
                    .map(|oi| {
                        let mut vals: Vec<f64> = gaps.iter().map(|g| pick(g)[ni][oi]).collect();
                        vals.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
                        let m = vals.len() / 2;
                        if vals.len() % 2 == 1 {
                            vals[m]
                        } else {
                            0.5 * (vals[m - 1] + vals[m])
                        }
                    })
                    .collect::<Vec<f64>>()
            })
            .collect::<Vec<Vec<f64>>>()
    };
    let det_median = median_of(&|g| &g.0);
    let rand_median = median_of(&|g| &g.1);

    let slope_of = |rms: &[f64]| {
        let xs: Vec<f64> = schedule.iter().map(|&n| (n as f64).ln()).collect();
        let ys: Vec<f64> = rms.iter().map(|v| v.max(1e-300).ln()).collect();
        linear_fit(&xs, &ys).0
    };
    let det_slope = slope_of(&det_rms);
    let rand_slope = slope_of(&rand_rms);

    let mut n0_rows = Vec::new();
    for (kind, medians) in [("deterministic", &det_median), ("random", &rand_median)] {
        for &eps in &cfg.epsilons {
            for (oi, label) in labels.iter().enumerate() {
                let n0 = schedule
                    .iter()
                    .enumerate()
                    .find(|(ni, _)| medians[*ni][oi] <= eps)
                    .map(|(_, &n)| n);
                n0_rows.push(N0Row {
                    kind,
                    epsilon: eps,
                    label: label.clone(),
                    n0,
                });
            }
        }
    }

    Ok(BirkhoffReport {
        schedule,
        labels,
        det_rms,
        rand_rms,
        det_median,
        rand_median,
        det_slope,
        rand_slope,
        n0_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_config(extra: &str) -> ExperimentConfig {
        let text = format!(
            r#"
            [map]
            family = "linear-expanding"
            k = 2
            [noise]
            shape = "uniform-ball"
            epsilons = [0.01]
            [orbit]
            length = 2000
            burn_in = 100
            [ulam]
            cells = 128
            [run]
            seed = 11
            {extra}
        "#
        );
        ExperimentConfig::from_toml_str(&text).unwrap()
    }

    #[test]
    fn simulate_produces_valid_pseudo_orbits() {
        let cfg = base_config("replicas = 3");
        let report = run_simulate(&cfg).unwrap();
        assert_eq!(report.orbits.len(), 3);
        assert!(report.verifications.iter().all(|v| v.valid));
        // Replay is identical.
        let again = run_simulate(&cfg).unwrap();
        assert_eq!(report.orbits[2].points, again.orbits[2].points);
        // Distinct replicas differ.
        assert_ne!(report.orbits[0].points, report.orbits[1].points);
    }

    #[test]
    fn shadow_demo_passes_certificate_and_bounds() {
        let cfg = base_config("");
        let report = run_shadow_demo(&cfg).unwrap();
        assert!(report.certificate.pass, "{:?}", report.certificate);
        assert!(report.all_bounds_ok());
        assert_eq!(report.step_bounds.len(), 17);
        // lhs = 0 for the constant observable.
        let constant = report.step_bounds.iter().find(|r| r.label == "1").unwrap();
        assert!(constant.lhs < 1e-12);
        // Replay identical.
        let again = run_shadow_demo(&cfg).unwrap();
        assert_eq!(
            report.certificate.shadow_distance,
            again.certificate.shadow_distance
        );
        for (a, b) in report.step_bounds.iter().zip(&again.step_bounds) {
            assert_eq!(a.lhs, b.lhs);
        }
    }

    #[test]
    fn degenerate_shadow_of_true_orbit_has_zero_gaps() {
        // A true orbit shadowed by itself: lhs vanishes for every
        // observable.
        let cfg = base_config("");
        let orbit = cfg.map.orbit(&PhasePoint::circle(0.3717), 500);
        let report = shadow_pseudo_orbit(&cfg, orbit, 0.0, false).unwrap();
        assert!(report.max_gap == 0.0);
        assert!(report.certificate.pass);
        assert!(report.step_bounds.iter().all(|r| r.lhs == 0.0));
    }

    #[test]
    fn sweep_rows_satisfy_bounds_for_doubling() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            [map]
            family = "linear-expanding"
            [noise]
            epsilons = [0.05, 0.02]
            [orbit]
            length = 20000
            burn_in = 500
            [ulam]
            cells = 256
            [run]
            seed = 3
            replicas = 2
        "#,
        )
        .unwrap();
        let mut seen = 0;
        let rows = run_sweep(&cfg, |_| seen += 1).unwrap();
        assert_eq!(seen, 2);
        assert_eq!(rows.len(), 2);
        for row in &rows {
            // Lebesgue is stationary for every radius here.
            assert!(row.w1.unwrap() < 1e-8, "w1 {:?}", row.w1);
            assert!(row.bound_satisfied);
            assert!(
                row.mc_within_budget,
                "median {} budget {}",
                row.mc_metric_median, row.mc_budget
            );
            assert!(row.max_normalized_gap < 1e-8);
        }
        assert!(rows[0].epsilon > rows[1].epsilon);
        assert!(rows[0].delta > rows[1].delta);
    }

    #[test]
    fn birkhoff_schedule_doubles_to_the_configured_length() {
        assert_eq!(
            birkhoff_schedule(128_000),
            vec![1_000, 2_000, 4_000, 8_000, 16_000, 32_000, 64_000, 128_000]
        );
        assert_eq!(birkhoff_schedule(3_000), vec![1_500, 3_000]);
        assert_eq!(birkhoff_schedule(1_000), vec![1_000]);
    }

    #[test]
    fn birkhoff_constant_observable_has_zero_gap() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            [map]
            family = "linear-expanding"
            [noise]
            epsilons = [0.01]
            [orbit]
            length = 8000
            [ulam]
            cells = 128
            [dictionary]
            max_frequency = 2
            [run]
            seed = 5
            replicas = 3
        "#,
        )
        .unwrap();
        let report = run_birkhoff(&cfg).unwrap();
        let const_idx = report.labels.iter().position(|l| l == "1").unwrap();
        for row in &report.det_median {
            assert!(row[const_idx] < 1e-12);
        }
        for row in &report.rand_median {
            assert!(row[const_idx] < 1e-10);
        }
        // Larger n gives smaller rms gaps overall (first vs last).
        assert!(report.det_rms.last().unwrap() < report.det_rms.first().unwrap());
        // Determinism.
        let again = run_birkhoff(&cfg).unwrap();
        assert_eq!(report.det_rms, again.det_rms);
        assert_eq!(report.rand_rms, again.rand_rms);
    }

    #[test]
    fn cosine_kernel_runs_end_to_end() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            [map]
            family = "nonlinear-expanding"
            a = 0.05
            [noise]
            shape = "cosine-bump"
            epsilons = [0.05]
            [orbit]
            length = 5000
            [ulam]
            cells = 128
            [run]
            seed = 9
        "#,
        )
        .unwrap();
        let report = run_stationary(&cfg).unwrap();
        assert!(report.crossval.within_budget);
        let shadow = run_shadow_demo(&cfg).unwrap();
        assert!(shadow.certificate.pass);
        assert!(shadow.all_bounds_ok());
    }
}
