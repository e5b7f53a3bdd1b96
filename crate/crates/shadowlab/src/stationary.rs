//! Stationary measures of the perturbed chain, two independent ways.
//!
//! The discretized route partitions the space into `k` cells per dimension
//! and assembles the row-stochastic cell-to-cell transition matrix: entry
//! `(i, j)` averages, over `q` quadrature points per dimension in cell `i`,
//! the kernel probability of landing in cell `j`. Those probabilities are
//! closed-form (interval CDFs on the circle, exact disk/rectangle overlap
//! for the uniform ball on the torus; the torus cosine bump integrates its
//! density by adaptive quadrature). The stationary density is the left
//! fixed point of the matrix, found by power iteration from the uniform
//! vector — the chain at positive noise mixes strongly, so iteration
//! converges quickly and the matrix stays sparse with bandwidth about
//! `eps * k`.
//!
//! The sampling route runs the chain itself and time-averages; the two
//! estimators are cross-validated against a frozen error budget. The
//! zero-radius kernel is admitted here only, to produce the classical
//! transfer-operator fixed point as the zero-noise reference density.

use crate::dynamics::MapSpec;
use crate::error::{Error, Result};
use crate::measures::{
    dictionary_gap, standard_dictionary, wasserstein1_circle, EmpiricalMeasure, GridMeasure,
};
use crate::noise::{orbit_rng, sample_step, NoiseKernel};
use crate::numerics::{kahan_sum, KahanSum};
use crate::phase_space::{PhasePoint, Space};
use rand::Rng;
use rayon::prelude::*;

/// Row sums of a built operator must be 1 within this.
pub const ROW_SUM_TOL: f64 = 1e-10;
/// Default power-iteration stopping tolerance (successive L1 difference).
pub const DEFAULT_POWER_TOL: f64 = 1e-12;
/// Default power-iteration budget.
pub const DEFAULT_MAX_ITER: usize = 100_000;

#[derive(Clone, Debug)]
struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    fn from_rows(rows: Vec<Vec<(u32, f64)>>) -> Self {
        let n = rows.len();
        let nnz: usize = rows.iter().map(|r| r.len()).sum();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix { n, row_ptr, cols, vals }
    }

    /// `out = pi * P` (left action of a row-stochastic matrix).
    fn left_apply(&self, pi: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for i in 0..self.n {
            let w = pi[i];
            if w == 0.0 {
                continue;
            }
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                out[self.cols[idx] as usize] += w * self.vals[idx];
            }
        }
    }
}

/// Discretized transition operator of the perturbed chain on a uniform
/// cell partition.
#[derive(Clone, Debug)]
pub struct UlamOperator {
    space: Space,
    cells_per_dim: usize,
    quadrature: usize,
    map: MapSpec,
    kernel: NoiseKernel,
    matrix: CsrMatrix,
    warnings: Vec<String>,
}

impl UlamOperator {
    pub fn space(&self) -> Space {
        self.space
    }

    pub fn cells_per_dim(&self) -> usize {
        self.cells_per_dim
    }

    pub fn cell_count(&self) -> usize {
        self.matrix.n
    }

    pub fn quadrature(&self) -> usize {
        self.quadrature
    }

    pub fn map(&self) -> &MapSpec {
        &self.map
    }

    pub fn kernel(&self) -> &NoiseKernel {
        &self.kernel
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Nonzero entries of row `i` as `(column, probability)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.matrix.row_ptr[i]..self.matrix.row_ptr[i + 1])
            .map(move |idx| (self.matrix.cols[idx] as usize, self.matrix.vals[idx]))
    }

    /// The quadrature points used for row `i`: a per-cell grid that tiles
    /// the whole space uniformly across rows.
    pub fn quadrature_points(&self, i: usize) -> Vec<PhasePoint> {
        let k = self.cells_per_dim as f64;
        let q = self.quadrature;
        let offset = |cell: usize, r: usize| (cell as f64 + (r as f64 + 0.5) / q as f64) / k;
        match self.space {
            Space::Circle => (0..q).map(|r| PhasePoint::circle(offset(i, r))).collect(),
            Space::Torus => {
                let (ix, iy) = (i % self.cells_per_dim, i / self.cells_per_dim);
                let mut pts = Vec::with_capacity(q * q);
                for ry in 0..q {
                    for rx in 0..q {
                        pts.push(PhasePoint::torus(offset(ix, rx), offset(iy, ry)));
                    }
                }
                pts
            }
        }
    }

    /// Largest deviation of any row sum from 1.
    pub fn max_row_sum_deviation(&self) -> f64 {
        (0..self.matrix.n)
            .map(|i| {
                let mut s = KahanSum::new();
                for idx in self.matrix.row_ptr[i]..self.matrix.row_ptr[i + 1] {
                    s.add(self.matrix.vals[idx]);
                }
                (s.value() - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Left action `pi -> pi P` on a mass vector.
    pub fn propagate(&self, pi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.matrix.n];
        self.matrix.left_apply(pi, &mut out);
        out
    }
}

fn merge_columns(mut entries: Vec<(u32, f64)>) -> Vec<(u32, f64)> {
    entries.sort_unstable_by_key(|e| e.0);
    let mut out: Vec<(u32, f64)> = Vec::with_capacity(entries.len());
    for (c, v) in entries {
        if let Some(last) = out.last_mut() {
            if last.0 == c {
                last.1 += v;
                continue;
            }
        }
        out.push((c, v));
    }
    out
}

fn assemble_row_circle(
    map: &MapSpec,
    kernel: &NoiseKernel,
    k: usize,
    q: usize,
    i: usize,
) -> Result<Vec<(u32, f64)>> {
    let kf = k as f64;
    let weight = 1.0 / q as f64;
    let mut entries: Vec<(u32, f64)> = Vec::new();

    if kernel.is_degenerate() {
        for r in 0..q {
            let x = PhasePoint::circle((i as f64 + (r as f64 + 0.5) / q as f64) / kf);
            let c = map.apply(&x).x();
            let col = ((c * kf) as usize).min(k - 1) as u32;
            entries.push((col, weight));
        }
        return Ok(merge_columns(entries));
    }

    let eps = kernel.epsilon();
    let mut centers = Vec::with_capacity(q);
    let (mut lo_min, mut hi_max) = (i64::MAX, i64::MIN);
    for r in 0..q {
        let x = PhasePoint::circle((i as f64 + (r as f64 + 0.5) / q as f64) / kf);
        let c = map.apply(&x).x();
        let j_lo = ((c - eps) * kf).floor() as i64;
        let j_hi = ((c + eps) * kf).floor() as i64;
        lo_min = lo_min.min(j_lo);
        hi_max = hi_max.max(j_hi);
        centers.push((c, j_lo, j_hi));
    }
    let mut buf = vec![0.0f64; (hi_max - lo_min + 1) as usize];
    for (c, j_lo, j_hi) in centers {
        for jl in j_lo..=j_hi {
            let p = kernel.interval_prob(jl as f64 / kf - c, (jl + 1) as f64 / kf - c);
            buf[(jl - lo_min) as usize] += weight * p;
        }
    }
    for (off, v) in buf.iter().enumerate() {
        if *v > 0.0 {
            let col = (lo_min + off as i64).rem_euclid(k as i64) as u32;
            entries.push((col, *v));
        }
    }
    Ok(merge_columns(entries))
}

fn assemble_row_torus(
    map: &MapSpec,
    kernel: &NoiseKernel,
    k: usize,
    q: usize,
    i: usize,
) -> Result<Vec<(u32, f64)>> {
    let kf = k as f64;
    let weight = 1.0 / (q * q) as f64;
    let (ix, iy) = (i % k, i / k);
    let offset = |cell: usize, r: usize| (cell as f64 + (r as f64 + 0.5) / q as f64) / kf;
    let mut entries: Vec<(u32, f64)> = Vec::new();

    if kernel.is_degenerate() {
        for ry in 0..q {
            for rx in 0..q {
                let p = PhasePoint::torus(offset(ix, rx), offset(iy, ry));
                let c = map.apply(&p);
                let cx = ((c.x() * kf) as usize).min(k - 1);
                let cy = ((c.y() * kf) as usize).min(k - 1);
                entries.push(((cy * k + cx) as u32, weight));
            }
        }
        return Ok(merge_columns(entries));
    }

    let eps = kernel.epsilon();
    let mut centers = Vec::with_capacity(q * q);
    let (mut xlo_min, mut xhi_max) = (i64::MAX, i64::MIN);
    let (mut ylo_min, mut yhi_max) = (i64::MAX, i64::MIN);
    for ry in 0..q {
        for rx in 0..q {
            let p = PhasePoint::torus(offset(ix, rx), offset(iy, ry));
            let c = map.apply(&p);
            let jx_lo = ((c.x() - eps) * kf).floor() as i64;
            let jx_hi = ((c.x() + eps) * kf).floor() as i64;
            let jy_lo = ((c.y() - eps) * kf).floor() as i64;
            let jy_hi = ((c.y() + eps) * kf).floor() as i64;
            xlo_min = xlo_min.min(jx_lo);
            xhi_max = xhi_max.max(jx_hi);
            ylo_min = ylo_min.min(jy_lo);
            yhi_max = yhi_max.max(jy_hi);
            centers.push((c, jx_lo, jx_hi, jy_lo, jy_hi));
        }
    }
    let nx = (xhi_max - xlo_min + 1) as usize;
    let ny = (yhi_max - ylo_min + 1) as usize;
    let mut buf = vec![0.0f64; nx * ny];
    for (c, jx_lo, jx_hi, jy_lo, jy_hi) in centers {
        for jy in jy_lo..=jy_hi {
            let y0 = jy as f64 / kf - c.y();
            let y1 = (jy + 1) as f64 / kf - c.y();
            for jx in jx_lo..=jx_hi {
                let p = kernel.rect_prob(
                    jx as f64 / kf - c.x(),
                    (jx + 1) as f64 / kf - c.x(),
                    y0,
                    y1,
                );
                if p > 0.0 {
                    buf[(jy - ylo_min) as usize * nx + (jx - xlo_min) as usize] += weight * p;
                }
            }
        }
    }
    for oy in 0..ny {
        let cy = (ylo_min + oy as i64).rem_euclid(k as i64) as usize;
        for ox in 0..nx {
            let v = buf[oy * nx + ox];
            if v > 0.0 {
                let cx = (xlo_min + ox as i64).rem_euclid(k as i64) as usize;
                entries.push(((cy * k + cx) as u32, v));
            }
        }
    }
    Ok(merge_columns(entries))
}

/// Assemble the discretized transition operator. Rows are independent and
/// built in parallel; assembly is deterministic.
pub fn build_ulam(
    map: &MapSpec,
    kernel: &NoiseKernel,
    cells_per_dim: usize,
    quadrature: usize,
) -> Result<UlamOperator> {
    if cells_per_dim < 16 {
        return Err(Error::Usage(format!(
            "cell count per dimension must be >= 16, got {cells_per_dim}"
        )));
    }
    if quadrature < 1 {
        return Err(Error::Usage("quadrature points per cell must be >= 1".into()));
    }
    let space = map.space();
    let k = cells_per_dim;
    let n = k.pow(space.dimension() as u32);

    let mut warnings = Vec::new();
    if !kernel.is_degenerate() {
        let cell_width = 1.0 / k as f64;
        if cell_width >= 2.0 * kernel.epsilon() {
            warnings.push(format!(
                "cell width {cell_width:.3e} is at least the ball diameter {:.3e}; \
                 the kernel is unresolved at this resolution",
                2.0 * kernel.epsilon()
            ));
        } else if cell_width >= kernel.epsilon() {
            warnings.push(format!(
                "cell width {cell_width:.3e} is not below the noise radius {:.3e}",
                kernel.epsilon()
            ));
        }
    }

    let rows: Result<Vec<Vec<(u32, f64)>>> = (0..n)
        .into_par_iter()
        .map(|i| match space {
            Space::Circle => assemble_row_circle(map, kernel, k, quadrature, i),
            Space::Torus => assemble_row_torus(map, kernel, k, quadrature, i),
        })
        .collect();
    let rows = rows?;

    for (i, row) in rows.iter().enumerate() {
        let mut s = KahanSum::new();
        for (_, v) in row {
            if *v < 0.0 {
                return Err(Error::Numerical(format!("negative entry in row {i}")));
            }
            s.add(*v);
        }
        if (s.value() - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::Numerical(format!(
                "row {i} sums to {} (off by more than {ROW_SUM_TOL})",
                s.value()
            )));
        }
    }

    Ok(UlamOperator {
        space,
        cells_per_dim: k,
        quadrature,
        map: *map,
        kernel: *kernel,
        matrix: CsrMatrix::from_rows(rows),
        warnings,
    })
}

/// Fixed point of the operator's left action, with its residual.
#[derive(Clone, Debug)]
pub struct StationaryResult {
    pub density: GridMeasure,
    /// `|pi P - pi|_1` of the returned vector.
    pub residual: f64,
    pub iterations: usize,
}

/// Left power iteration from the uniform vector until the successive L1
/// difference drops below `tol`. The returned residual is recomputed
/// directly; it can only be smaller than `tol` because a stochastic matrix
/// is L1-nonexpansive.
pub fn stationary_distribution(
    op: &UlamOperator,
    tol: f64,
    max_iter: usize,
) -> Result<StationaryResult> {
    if !(tol > 0.0) {
        return Err(Error::Usage(format!("tolerance must be positive, got {tol}")));
    }
    let n = op.cell_count();
    let mut pi = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    for m in 1..=max_iter {
        op.matrix.left_apply(&pi, &mut next);
        let total = kahan_sum(&next);
        next.iter_mut().for_each(|v| *v /= total);
        let mut diff = KahanSum::new();
        for (a, b) in next.iter().zip(&pi) {
            diff.add((a - b).abs());
        }
        std::mem::swap(&mut pi, &mut next);
        if diff.value() <= tol {
            op.matrix.left_apply(&pi, &mut next);
            let mut residual = KahanSum::new();
            for (a, b) in next.iter().zip(&pi) {
                residual.add((a - b).abs());
            }
            let density = GridMeasure::new(op.space(), op.cells_per_dim(), pi)?;
            return Ok(StationaryResult {
                density,
                residual: residual.value(),
                iterations: m,
            });
        }
        if m == max_iter {
            return Err(Error::NonConvergence {
                iterations: m,
                residual: diff.value(),
                last: pi,
            });
        }
    }
    unreachable!("loop returns or errors")
}

/// Classical zero-noise transfer-operator fixed point: the reference
/// density for stochastic-stability comparisons.
pub fn zero_noise_acim(map: &MapSpec, cells_per_dim: usize, quadrature: usize) -> Result<StationaryResult> {
    let op = build_ulam(map, &NoiseKernel::degenerate(), cells_per_dim, quadrature)?;
    stationary_distribution(&op, DEFAULT_POWER_TOL, DEFAULT_MAX_ITER)
}

/// Time-average estimate of the stationary measure: run the chain, discard
/// `burn_in` steps, and keep the next `n` points as an empirical measure.
pub fn monte_carlo_stationary<R: Rng>(
    map: &MapSpec,
    kernel: &NoiseKernel,
    x0: &PhasePoint,
    burn_in: usize,
    n: usize,
    rng: &mut R,
) -> Result<EmpiricalMeasure> {
    if n < 1_000 {
        return Err(Error::Usage(format!(
            "monte carlo estimate needs n >= 1000 samples, got {n}"
        )));
    }
    let mut x = *x0;
    for _ in 0..burn_in {
        x = sample_step(kernel, map, &x, rng)?;
    }
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        x = sample_step(kernel, map, &x, rng)?;
        points.push(x);
    }
    EmpiricalMeasure::from_points(&points)
}

/// Inputs for a two-estimator stationary computation.
#[derive(Clone, Copy, Debug)]
pub struct StationarySetup {
    pub map: MapSpec,
    pub kernel: NoiseKernel,
    pub cells_per_dim: usize,
    pub quadrature: usize,
    pub burn_in: usize,
    pub samples: usize,
    pub master_seed: u64,
    /// Replica `s` uses stream `stream_base + s`, so callers can isolate
    /// groups of replicas (e.g. one group per sweep row).
    pub stream_base: u64,
    pub replicas: usize,
    pub dict_max_freq: u32,
    pub tol: f64,
    pub max_iter: usize,
}

/// One Monte Carlo replica compared against the operator fixed point.
#[derive(Clone, Debug)]
pub struct SeedDiscrepancy {
    pub stream: u64,
    pub x0: PhasePoint,
    /// Exact transport distance; circle only.
    pub w1: Option<f64>,
    pub max_normalized_gap: f64,
}

/// Agreement report between the two stationary estimators.
#[derive(Clone, Debug)]
pub struct CrossValidation {
    pub ulam: StationaryResult,
    /// Warnings from the operator build (e.g. unresolved kernel).
    pub warnings: Vec<String>,
    pub per_seed: Vec<SeedDiscrepancy>,
    pub w1_median: Option<f64>,
    pub gap_median: f64,
    /// `2 (1/k + 3/sqrt(n))`: grid resolution plus CLT-scale sampling error.
    pub budget: f64,
    pub within_budget: bool,
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Compute the stationary measure by operator fixed point and by `replicas`
/// independent chain averages, and compare. Each replica draws its own
/// initial point from its stream, so agreement across replicas also probes
/// independence of the estimate from the starting point.
pub fn cross_validate(setup: &StationarySetup) -> Result<CrossValidation> {
    let op = build_ulam(
        &setup.map,
        &setup.kernel,
        setup.cells_per_dim,
        setup.quadrature,
    )?;
    let warnings = op.warnings().to_vec();
    let ulam = stationary_distribution(&op, setup.tol, setup.max_iter)?;
    let dict = standard_dictionary(setup.map.space(), setup.dict_max_freq);

    let per_seed: Result<Vec<SeedDiscrepancy>> = (0..setup.replicas)
        .into_par_iter()
        .map(|s| {
            let stream = setup.stream_base + s as u64;
            let mut rng = orbit_rng(setup.master_seed, stream);
            let x0 = crate::noise::random_point(setup.map.space(), &mut rng);
            let mc = monte_carlo_stationary(
                &setup.map,
                &setup.kernel,
                &x0,
                setup.burn_in,
                setup.samples,
                &mut rng,
            )?;
            let w1 = match setup.map.space() {
                Space::Circle => Some(wasserstein1_circle(&mc, &ulam.density)?),
                Space::Torus => None,
            };
            let gap = dictionary_gap(&mc, &ulam.density, &dict)?;
            Ok(SeedDiscrepancy {
                stream,
                x0,
                w1,
                max_normalized_gap: gap.max_normalized,
            })
        })
        .collect();
    let per_seed = per_seed?;

    let budget = 2.0 * (1.0 / setup.cells_per_dim as f64 + 3.0 / (setup.samples as f64).sqrt());
    let gap_median = median(
        &per_seed
            .iter()
            .map(|s| s.max_normalized_gap)
            .collect::<Vec<_>>(),
    );
    let w1_median = if per_seed.iter().all(|s| s.w1.is_some()) {
        Some(median(
            &per_seed.iter().map(|s| s.w1.unwrap()).collect::<Vec<_>>(),
        ))
    } else {
        None
    };
    let within_budget = w1_median.unwrap_or(gap_median) <= budget;

    Ok(CrossValidation {
        ulam,
        warnings,
        per_seed,
        w1_median,
        gap_median,
        budget,
        within_budget,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::KernelShape;
    use crate::phase_space::dist_unchecked;

    fn doubling() -> MapSpec {
        MapSpec::linear_expanding(2).unwrap()
    }

    fn density_deviation_from_uniform(g: &GridMeasure) -> f64 {
        let n = g.cell_count() as f64;
        g.masses()
            .iter()
            .map(|m| (m * n - 1.0).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn build_validates_inputs() {
        let f = doubling();
        let kernel = NoiseKernel::new(KernelShape::UniformBall, 0.01).unwrap();
        assert!(build_ulam(&f, &kernel, 8, 4).is_err());
        assert!(build_ulam(&f, &kernel, 64, 0).is_err());
        // Coarse grid relative to epsilon produces a warning.
        let op = build_ulam(&f, &NoiseKernel::new(KernelShape::UniformBall, 0.004).unwrap(), 64, 2)
            .unwrap();
        assert!(!op.warnings().is_empty());
        let op = build_ulam(&f, &kernel, 256, 2).unwrap();
        assert!(op.warnings().is_empty());
    }

    #[test]
    fn rows_are_stochastic_and_local() {
        let maps: Vec<(MapSpec, usize, usize)> = vec![
            (doubling(), 64, 4),
            (MapSpec::nonlinear_expanding(0.05).unwrap(), 64, 3),
            (MapSpec::cat_map(), 16, 2),
        ];
        for (map, k, q) in maps {
            for shape in [KernelShape::UniformBall, KernelShape::CosineBump] {
                let kernel = NoiseKernel::new(shape, 0.08).unwrap();
                let op = build_ulam(&map, &kernel, k, q).unwrap();
                assert!(
                    op.max_row_sum_deviation() <= ROW_SUM_TOL,
                    "{map:?} {shape:?}: row sum deviation {}",
                    op.max_row_sum_deviation()
                );
                // Locality: a nonzero entry stays within eps + 2 cell widths
                // of some quadrature-point image.
                let grid = GridMeasure::uniform(map.space(), k);
                let reach = 0.08 + 2.0 / k as f64;
                for i in (0..op.cell_count()).step_by(7) {
                    let images: Vec<PhasePoint> = op
                        .quadrature_points(i)
                        .iter()
                        .map(|p| map.apply(p))
                        .collect();
                    for (j, v) in op.row(i) {
                        assert!(v >= 0.0);
                        let center = grid.cell_center(j);
                        let d = images
                            .iter()
                            .map(|c| dist_unchecked(c, &center))
                            .fold(f64::INFINITY, f64::min);
                        assert!(
                            d <= reach,
                            "{map:?} {shape:?}: entry ({i},{j}) at distance {d} > {reach}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn zero_noise_doubling_operator_is_doubly_stochastic() {
        // Classical transfer-operator discretization of doubling: uniform is
        // an exact left fixed point for even cell counts.
        let f = doubling();
        let op = build_ulam(&f, &NoiseKernel::degenerate(), 64, 4).unwrap();
        let n = op.cell_count();
        let uniform = vec![1.0 / n as f64; n];
        let out = op.propagate(&uniform);
        let dev = out
            .iter()
            .map(|v| (v - 1.0 / n as f64).abs())
            .fold(0.0, f64::max);
        assert!(dev < 1e-15, "deviation {dev}");

        let result = zero_noise_acim(&f, 64, 4).unwrap();
        assert!(density_deviation_from_uniform(&result.density) < 1e-8);
        assert!(result.residual <= DEFAULT_POWER_TOL);
    }

    #[test]
    fn noisy_doubling_keeps_lebesgue_stationary() {
        let f = doubling();
        let kernel = NoiseKernel::new(KernelShape::UniformBall, 0.02).unwrap();
        let op = build_ulam(&f, &kernel, 128, 4).unwrap();
        let result = stationary_distribution(&op, DEFAULT_POWER_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(density_deviation_from_uniform(&result.density) < 1e-10);
        assert!(result.residual <= DEFAULT_POWER_TOL);
    }

    #[test]
    fn zero_noise_cat_operator_fixes_uniform() {
        let cat = MapSpec::cat_map();
        let op = build_ulam(&cat, &NoiseKernel::degenerate(), 16, 2).unwrap();
        let n = op.cell_count();
        let uniform = vec![1.0 / n as f64; n];
        let out = op.propagate(&uniform);
        let dev = out
            .iter()
            .map(|v| (v - 1.0 / n as f64).abs())
            .fold(0.0, f64::max);
        assert!(dev < 1e-15, "deviation {dev}");
    }

    #[test]
    fn nonlinear_map_has_nonuniform_stationary_density() {
        let g = MapSpec::nonlinear_expanding(0.05).unwrap();
        let kernel = NoiseKernel::new(KernelShape::UniformBall, 0.01).unwrap();
        let op = build_ulam(&g, &kernel, 512, 4).unwrap();
        let result = stationary_distribution(&op, DEFAULT_POWER_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(result.residual <= DEFAULT_POWER_TOL);
        let dev = density_deviation_from_uniform(&result.density);
        assert!(dev > 1e-3, "expected visible non-uniformity, got {dev}");
    }

    #[test]
    fn non_convergence_carries_last_iterate() {
        let f = doubling();
        let g = MapSpec::nonlinear_expanding(0.05).unwrap();
        let kernel = NoiseKernel::new(KernelShape::UniformBall, 0.01).unwrap();
        let _ = f;
        let op = build_ulam(&g, &kernel, 64, 2).unwrap();
        match stationary_distribution(&op, 1e-16, 2) {
            Err(Error::NonConvergence { iterations, last, .. }) => {
                assert_eq!(iterations, 2);
                assert_eq!(last.len(), 64);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn monte_carlo_examples() {
        let f = doubling();
        let kernel = NoiseKernel::new(KernelShape::UniformBall, 0.02).unwrap();
        // W1 to the uniform reference stays at CLT scale across seeds.
        let n = 20_000usize;
        let fine = GridMeasure::uniform(Space::Circle, 4096);
        for seed in 0..10u64 {
            let mut rng = orbit_rng(900 + seed, 0);
            let mc =
                monte_carlo_stationary(&f, &kernel, &PhasePoint::circle(0.3), 1000, n, &mut rng)
                    .unwrap();
            let w1 = wasserstein1_circle(&mc, &fine).unwrap();
            assert!(w1 <= 3.0 / (n as f64).sqrt(), "seed {seed}: w1 {w1}");
        }

        // Degenerate chain from the fixed point is the Dirac mass there.
        let mut rng = orbit_rng(1, 0);
        let mc = monte_carlo_stationary(
            &f,
            &NoiseKernel::degenerate(),
            &PhasePoint::circle(0.0),
            10,
            1_000,
            &mut rng,
        )
        .unwrap();
        assert!(mc.atoms().iter().all(|(p, _)| p.x() == 0.0));

        // Sample-size precondition.
        assert!(monte_carlo_stationary(&f, &kernel, &PhasePoint::circle(0.0), 0, 10, &mut rng)
            .is_err());
    }

    #[test]
    fn two_estimators_agree_for_nonlinear_map() {
        let g = MapSpec::nonlinear_expanding(0.05).unwrap();
        let kernel = NoiseKernel::new(KernelShape::UniformBall, 0.02).unwrap();
        let k = 512usize;
        let n = 100_000usize;
        let op = build_ulam(&g, &kernel, k, 4).unwrap();
        let ulam = stationary_distribution(&op, DEFAULT_POWER_TOL, DEFAULT_MAX_ITER).unwrap();
        let mut rng = orbit_rng(31, 0);
        let mc =
            monte_carlo_stationary(&g, &kernel, &PhasePoint::circle(0.5), 10_000, n, &mut rng)
                .unwrap();
        let w1 = wasserstein1_circle(&mc, &ulam.density).unwrap();
        let budget = 2.0 * (1.0 / k as f64 + 3.0 / (n as f64).sqrt());
        assert!(w1 <= budget, "w1 {w1} > budget {budget}");
    }

    #[test]
    fn cross_validation_is_deterministic_and_within_budget() {
        let setup = StationarySetup {
            map: doubling(),
            kernel: NoiseKernel::new(KernelShape::UniformBall, 0.02).unwrap(),
            cells_per_dim: 128,
            quadrature: 4,
            burn_in: 500,
            samples: 20_000,
            master_seed: 77,
            stream_base: 0,
            replicas: 4,
            dict_max_freq: 8,
            tol: DEFAULT_POWER_TOL,
            max_iter: DEFAULT_MAX_ITER,
        };
        let a = cross_validate(&setup).unwrap();
        let b = cross_validate(&setup).unwrap();
        assert!(a.within_budget, "median {:?} budget {}", a.w1_median, a.budget);
        assert_eq!(a.w1_median, b.w1_median);
        assert_eq!(a.gap_median, b.gap_median);
        for (x, y) in a.per_seed.iter().zip(&b.per_seed) {
            assert_eq!(x.w1, y.w1);
            assert_eq!(x.x0, y.x0);
        }
        // Replicas start from distinct points.
        assert_ne!(a.per_seed[0].x0, a.per_seed[1].x0);
    }

    #[test]
    fn refinement_halves_with_cell_width() {
        // Stationary densities at k and 2k cells: the discrepancy scales
        // like the cell width.
        let g = MapSpec::nonlinear_expanding(0.05).unwrap();
        let kernel = NoiseKernel::new(KernelShape::UniformBall, 0.05).unwrap();
        let mut w1s = Vec::new();
        for k in [256usize, 512, 1024] {
            let op = build_ulam(&g, &kernel, k, 4).unwrap();
            let r = stationary_distribution(&op, DEFAULT_POWER_TOL, DEFAULT_MAX_ITER).unwrap();
            w1s.push(r.density);
        }
        let d1 = wasserstein1_circle(&w1s[0], &w1s[1]).unwrap();
        let d2 = wasserstein1_circle(&w1s[1], &w1s[2]).unwrap();
        // Frozen constant: measured discrepancies are ~1e-4 at k=256 and
        // scale down linearly; 2.0/k leaves an order of magnitude of room.
        assert!(d1 <= 2.0 / 256.0, "d1 {d1}");
        assert!(d2 <= 2.0 / 512.0, "d2 {d2}");
        assert!(d2 <= 0.8 * d1 + 1e-6, "d1 {d1} d2 {d2}");
    }
}
