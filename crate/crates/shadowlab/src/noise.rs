//! Small random perturbations of a map.
//!
//! A noise kernel is a family of transition probabilities, one per point:
//! absolutely continuous, supported in the closed ball of radius `epsilon`
//! about the image `f(x)`. Two shapes are provided: uniform on the ball,
//! and a cosine bump `1 + cos(pi d / epsilon)` which vanishes smoothly at
//! the ball boundary. Iterating `sample_step` produces a random orbit of
//! the Markov chain; by the support constraint every such orbit is an
//! `epsilon`-pseudo-orbit of the unperturbed map.
//!
//! Randomness comes from counter-based ChaCha streams: a run is addressed
//! by `(master_seed, stream)` and is bit-reproducible. Callers allocating
//! many orbits give each its own stream index.

use crate::dynamics::MapSpec;
use crate::error::{Error, Result};
use crate::numerics::adaptive_simpson;
use crate::phase_space::{dist_unchecked, PhasePoint, Space};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Largest admissible noise radius: the ball must embed without wrapping
/// onto itself on either space.
pub const MAX_EPSILON: f64 = 0.25;

/// Density shape of the perturbation on the ball.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelShape {
    UniformBall,
    CosineBump,
}

impl KernelShape {
    pub fn name(&self) -> &'static str {
        match self {
            KernelShape::UniformBall => "uniform-ball",
            KernelShape::CosineBump => "cosine-bump",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "uniform-ball" => Ok(KernelShape::UniformBall),
            "cosine-bump" => Ok(KernelShape::CosineBump),
            other => Err(Error::Config(format!("unknown kernel shape '{other}'"))),
        }
    }
}

/// Transition kernel of the perturbed chain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseKernel {
    shape: KernelShape,
    epsilon: f64,
}

impl NoiseKernel {
    pub fn new(shape: KernelShape, epsilon: f64) -> Result<Self> {
        if !epsilon.is_finite() || epsilon <= 0.0 || epsilon >= MAX_EPSILON {
            return Err(Error::Usage(format!(
                "noise radius must satisfy 0 < epsilon < {MAX_EPSILON}, got {epsilon}"
            )));
        }
        Ok(NoiseKernel { shape, epsilon })
    }

    /// Zero-radius kernel: the chain degenerates to the deterministic map.
    /// Intended for oracle runs only; it has no density.
    pub fn degenerate() -> Self {
        NoiseKernel {
            shape: KernelShape::UniformBall,
            epsilon: 0.0,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn shape(&self) -> KernelShape {
        self.shape
    }

    pub fn is_degenerate(&self) -> bool {
        self.epsilon == 0.0
    }

    /// Transition density `p(y | center)` with respect to Lebesgue measure,
    /// where `center` is the image point the ball sits on.
    pub fn density(&self, space: Space, center: &PhasePoint, y: &PhasePoint) -> Result<f64> {
        if self.is_degenerate() {
            return Err(Error::Usage(
                "the degenerate kernel is not absolutely continuous".into(),
            ));
        }
        if center.dim() != space.dimension() || y.dim() != space.dimension() {
            return Err(Error::Usage("density: point dimension mismatch".into()));
        }
        let d = dist_unchecked(center, y);
        if d > self.epsilon {
            return Ok(0.0);
        }
        let e = self.epsilon;
        Ok(match (space, self.shape) {
            (Space::Circle, KernelShape::UniformBall) => 0.5 / e,
            (Space::Circle, KernelShape::CosineBump) => (1.0 + (PI * d / e).cos()) * 0.5 / e,
            (Space::Torus, KernelShape::UniformBall) => 1.0 / (PI * e * e),
            (Space::Torus, KernelShape::CosineBump) => {
                // Normalizer: integral of 1 + cos(pi r / e) over the disk
                // is e^2 (pi^2 - 4) / pi.
                (1.0 + (PI * d / e).cos()) * PI / (e * e * (PI * PI - 4.0))
            }
        })
    }

    /// Probability of the displacement interval `[lo, hi]` relative to the
    /// ball center, on the circle. Closed form for both shapes.
    pub fn interval_prob(&self, lo: f64, hi: f64) -> f64 {
        debug_assert!(!self.is_degenerate());
        let e = self.epsilon;
        let a = lo.clamp(-e, e);
        let b = hi.clamp(-e, e);
        if b <= a {
            return 0.0;
        }
        match self.shape {
            KernelShape::UniformBall => (b - a) / (2.0 * e),
            KernelShape::CosineBump => {
                let cdf = |u: f64| ((u + e) + (e / PI) * (PI * u / e).sin()) / (2.0 * e);
                cdf(b) - cdf(a)
            }
        }
    }

    /// Probability of an axis-aligned rectangle `[x0,x1] x [y0,y1]` given in
    /// displacement coordinates relative to the ball center, on the torus.
    ///
    /// Uniform-ball uses the exact disk/rectangle overlap area; the cosine
    /// bump integrates its density by nested adaptive quadrature over the
    /// rectangle clipped to the disk.
    pub fn rect_prob(&self, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
        debug_assert!(!self.is_degenerate());
        let e = self.epsilon;
        match self.shape {
            KernelShape::UniformBall => disk_rect_area(e, x0, x1, y0, y1) / (PI * e * e),
            KernelShape::CosineBump => {
                let mass = adaptive_simpson(
                    |x| {
                        let s = (e * e - x * x).max(0.0).sqrt();
                        let lo = y0.max(-s);
                        let hi = y1.min(s);
                        if hi <= lo {
                            0.0
                        } else {
                            adaptive_simpson(
                                |y| 1.0 + (PI * x.hypot(y) / e).cos(),
                                lo,
                                hi,
                                3e-14,
                            )
                        }
                    },
                    x0.max(-e),
                    x1.min(e),
                    3e-13,
                );
                mass * PI / (e * e * (PI * PI - 4.0))
            }
        }
    }

    /// Draw a displacement from the kernel, as one coordinate per dimension.
    fn sample_displacement<R: Rng>(&self, space: Space, rng: &mut R) -> Result<[f64; 2]> {
        let e = self.epsilon;
        match (space, self.shape) {
            (Space::Circle, KernelShape::UniformBall) => Ok([rng.random_range(-e..=e), 0.0]),
            (Space::Circle, KernelShape::CosineBump) => {
                for _ in 0..1_000_000 {
                    let t = rng.random_range(-e..=e);
                    let u = rng.random_range(0.0..2.0);
                    if u <= 1.0 + (PI * t / e).cos() {
                        return Ok([t, 0.0]);
                    }
                }
                Err(Error::Numerical("rejection sampler starved".into()))
            }
            (Space::Torus, KernelShape::UniformBall) => {
                for _ in 0..1_000_000 {
                    let dx = rng.random_range(-e..=e);
                    let dy = rng.random_range(-e..=e);
                    if dx * dx + dy * dy <= e * e {
                        return Ok([dx, dy]);
                    }
                }
                Err(Error::Numerical("rejection sampler starved".into()))
            }
            (Space::Torus, KernelShape::CosineBump) => {
                for _ in 0..1_000_000 {
                    let dx = rng.random_range(-e..=e);
                    let dy = rng.random_range(-e..=e);
                    let r = dx.hypot(dy);
                    let u = rng.random_range(0.0..2.0);
                    if r <= e && u <= 1.0 + (PI * r / e).cos() {
                        return Ok([dx, dy]);
                    }
                }
                Err(Error::Numerical("rejection sampler starved".into()))
            }
        }
    }
}

/// Seeded ChaCha stream for one unit of random work. The pair
/// `(master_seed, stream)` fully addresses the stream.
pub fn orbit_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// A Lebesgue-uniform point of the space.
pub fn random_point<R: Rng>(space: Space, rng: &mut R) -> PhasePoint {
    match space {
        Space::Circle => PhasePoint::circle(rng.random::<f64>()),
        Space::Torus => PhasePoint::torus(rng.random::<f64>(), rng.random::<f64>()),
    }
}

/// One step of the perturbed chain: a sample from the ball about `f(x)`.
/// With the degenerate kernel this is exactly `f(x)`.
pub fn sample_step<R: Rng>(
    kernel: &NoiseKernel,
    map: &MapSpec,
    x: &PhasePoint,
    rng: &mut R,
) -> Result<PhasePoint> {
    let center = map.apply(x);
    if kernel.is_degenerate() {
        return Ok(center);
    }
    let [dx, dy] = kernel.sample_displacement(map.space(), rng)?;
    Ok(match map.space() {
        Space::Circle => PhasePoint::circle(center.x() + dx),
        Space::Torus => PhasePoint::torus(center.x() + dx, center.y() + dy),
    })
}

/// A realization of the perturbed chain, with its addressing seed.
#[derive(Clone, Debug)]
pub struct RandomOrbit {
    pub points: Vec<PhasePoint>,
    pub master_seed: u64,
    pub stream: u64,
    pub kernel: NoiseKernel,
}

/// Generate the random orbit `(x_0, ..., x_n)`; deterministic in
/// `(master_seed, stream, kernel, map, x0, n)`.
pub fn random_orbit(
    kernel: &NoiseKernel,
    map: &MapSpec,
    x0: &PhasePoint,
    n: usize,
    master_seed: u64,
    stream: u64,
) -> Result<RandomOrbit> {
    let mut rng = orbit_rng(master_seed, stream);
    random_orbit_on(kernel, map, x0, n, master_seed, stream, &mut rng)
}

/// As `random_orbit`, but with `x_0` itself drawn uniformly from the
/// stream before the chain starts.
pub fn random_orbit_from_stream(
    kernel: &NoiseKernel,
    map: &MapSpec,
    n: usize,
    master_seed: u64,
    stream: u64,
) -> Result<RandomOrbit> {
    let mut rng = orbit_rng(master_seed, stream);
    let x0 = random_point(map.space(), &mut rng);
    random_orbit_on(kernel, map, &x0, n, master_seed, stream, &mut rng)
}

fn random_orbit_on<R: Rng>(
    kernel: &NoiseKernel,
    map: &MapSpec,
    x0: &PhasePoint,
    n: usize,
    master_seed: u64,
    stream: u64,
    rng: &mut R,
) -> Result<RandomOrbit> {
    if n < 1 {
        return Err(Error::Usage("random orbit needs n >= 1".into()));
    }
    if x0.dim() != map.space().dimension() {
        return Err(Error::Usage("random orbit: x0 dimension mismatch".into()));
    }
    let mut points = Vec::with_capacity(n + 1);
    points.push(*x0);
    let mut x = *x0;
    for _ in 0..n {
        x = sample_step(kernel, map, &x, rng)?;
        points.push(x);
    }
    Ok(RandomOrbit {
        points,
        master_seed,
        stream,
        kernel: *kernel,
    })
}

/// Outcome of checking the per-step error of a candidate pseudo-orbit.
#[derive(Clone, Copy, Debug)]
pub struct PseudoOrbitReport {
    pub valid: bool,
    /// `max_j d(f(x_j), x_{j+1})`.
    pub max_gap: f64,
    /// Index attaining the maximum gap.
    pub worst_index: usize,
}

/// Largest per-step error of a candidate pseudo-orbit and where it occurs.
pub(crate) fn max_orbit_gap(map: &MapSpec, seq: &[PhasePoint]) -> Result<(f64, usize)> {
    if seq.len() < 2 {
        return Err(Error::Usage("a pseudo-orbit needs at least 2 points".into()));
    }
    if seq.iter().any(|p| p.dim() != map.space().dimension()) {
        return Err(Error::Usage("pseudo-orbit point dimension mismatch".into()));
    }
    let mut max_gap = 0.0;
    let mut worst_index = 0;
    for (j, pair) in seq.windows(2).enumerate() {
        let gap = dist_unchecked(&map.apply(&pair[0]), &pair[1]);
        if gap > max_gap {
            max_gap = gap;
            worst_index = j;
        }
    }
    Ok((max_gap, worst_index))
}

/// Check `d(f(x_j), x_{j+1}) <= delta` for all `j`, reporting the worst gap.
pub fn verify_pseudo_orbit(
    map: &MapSpec,
    seq: &[PhasePoint],
    delta: f64,
) -> Result<PseudoOrbitReport> {
    if !delta.is_finite() || delta < 0.0 {
        return Err(Error::Usage(format!("delta must be finite and >= 0, got {delta}")));
    }
    let (max_gap, worst_index) = max_orbit_gap(map, seq)?;
    Ok(PseudoOrbitReport {
        valid: max_gap <= delta,
        max_gap,
        worst_index,
    })
}

/// Exact disk/axis-aligned-rectangle overlap area.
///
/// The rectangle is given relative to the disk center. Decomposes into the
/// four-corner inclusion-exclusion of `corner_area`.
pub fn disk_rect_area(r: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    (corner_area(r, x1, y1) - corner_area(r, x0, y1) - corner_area(r, x1, y0)
        + corner_area(r, x0, y0))
    .max(0.0)
}

/// Antiderivative of the half-chord: integral of sqrt(r^2 - u^2) du.
fn half_chord_integral(r: f64, u: f64) -> f64 {
    let u = u.clamp(-r, r);
    0.5 * (u * (r * r - u * u).max(0.0).sqrt() + r * r * (u / r).clamp(-1.0, 1.0).asin())
}

/// Disk area below the horizontal line `v = y`.
fn area_below(r: f64, y: f64) -> f64 {
    if y <= -r {
        0.0
    } else if y >= r {
        PI * r * r
    } else {
        2.0 * half_chord_integral(r, y) + 0.5 * PI * r * r
    }
}

/// Area of `disk(0, r) ∩ {u <= x} ∩ {v <= y}`.
fn corner_area(r: f64, x: f64, y: f64) -> f64 {
    if x <= -r || y <= -r {
        return 0.0;
    }
    if x >= r {
        return area_below(r, y);
    }
    if y >= r {
        return area_below(r, x);
    }
    let s = |u: f64| half_chord_integral(r, u);
    let t = (r * r - y * y).max(0.0).sqrt();
    if y >= 0.0 {
        // Full chords left of -t, chord clipped at height y on (-t, t),
        // full chords again right of t.
        let mut area = 0.0;
        let c1 = x.min(-t);
        area += 2.0 * (s(c1) - s(-r));
        if x > -t {
            let c2 = x.clamp(-t, t);
            area += (s(c2) - s(-t)) + y * (c2 + t);
            if x > t {
                area += 2.0 * (s(x) - s(t));
            }
        }
        area
    } else {
        // Only the band |u| < t contributes.
        if x <= -t {
            0.0
        } else {
            let c2 = x.clamp(-t, t);
            (s(c2) - s(-t)) + y * (c2 + t)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::circle_dist;
    use proptest::prelude::*;

    fn doubling() -> MapSpec {
        MapSpec::linear_expanding(2).unwrap()
    }

    #[test]
    fn kernel_constructor_validates_radius() {
        assert!(NoiseKernel::new(KernelShape::UniformBall, 0.0).is_err());
        assert!(NoiseKernel::new(KernelShape::UniformBall, 0.25).is_err());
        assert!(NoiseKernel::new(KernelShape::UniformBall, -0.1).is_err());
        assert!(NoiseKernel::new(KernelShape::UniformBall, 0.1).is_ok());
        assert!(NoiseKernel::degenerate().is_degenerate());
    }

    #[test]
    fn sample_stays_in_support() {
        let map = doubling();
        let kernel = NoiseKernel::new(KernelShape::UniformBall, 0.01).unwrap();
        let x = PhasePoint::circle(0.3);
        let mut rng = orbit_rng(11, 0);
        for _ in 0..2000 {
            let y = sample_step(&kernel, &map, &x, &mut rng).unwrap();
            // Image of 0.3 is 0.6; the sample lands in [0.59, 0.61].
            assert!(circle_dist(y.x(), 0.6) <= 0.01);
        }
    }

    #[test]
    fn degenerate_kernel_returns_exact_image() {
        let map = doubling();
        let kernel = NoiseKernel::degenerate();
        let x = PhasePoint::circle(0.3);
        let mut rng = orbit_rng(0, 0);
        let y = sample_step(&kernel, &map, &x, &mut rng).unwrap();
        assert_eq!(y.x(), map.apply(&x).x());
        assert!(kernel.density(Space::Circle, &y, &y).is_err());
    }

    #[test]
    fn uniform_sample_mean_matches_center() {
        let map = doubling();
        let eps = 0.01;
        let kernel = NoiseKernel::new(KernelShape::UniformBall, eps).unwrap();
        let x = PhasePoint::circle(0.3);
        let center = map.apply(&x).x();
        let mut rng = orbit_rng(42, 1);
        let n = 100_000usize;
        let mut sum = 0.0;
        for _ in 0..n {
            let y = sample_step(&kernel, &map, &x, &mut rng).unwrap();
            sum += crate::phase_space::signed_circle_delta(y.x(), center);
        }
        let mean_displacement = sum / n as f64;
        // Standard error of U(-eps, eps) is eps / sqrt(3 n).
        let bound = 3.0 * eps / (3.0 * n as f64).sqrt();
        assert!(
            mean_displacement.abs() <= bound,
            "mean displacement {mean_displacement} exceeds {bound}"
        );
    }

    #[test]
    fn density_normalizes_on_circle() {
        for shape in [KernelShape::UniformBall, KernelShape::CosineBump] {
            let kernel = NoiseKernel::new(shape, 0.07).unwrap();
            let center = PhasePoint::circle(0.4);
            let mass = adaptive_simpson(
                |t| {
                    kernel
                        .density(Space::Circle, &center, &PhasePoint::circle(t))
                        .unwrap()
                },
                0.4 - 0.07,
                0.4 + 0.07,
                1e-10,
            );
            assert!((mass - 1.0).abs() < 1e-6, "{shape:?}: mass {mass}");
        }
    }

    #[test]
    fn density_normalizes_on_torus() {
        for shape in [KernelShape::UniformBall, KernelShape::CosineBump] {
            let eps = 0.09;
            let kernel = NoiseKernel::new(shape, eps).unwrap();
            let center = PhasePoint::torus(0.5, 0.5);
            // Polar quadrature: the angular factor is 2 pi r by radial symmetry.
            let mass = adaptive_simpson(
                |r| {
                    let p = PhasePoint::torus(0.5 + r, 0.5);
                    2.0 * PI * r * kernel.density(Space::Torus, &center, &p).unwrap()
                },
                0.0,
                eps,
                1e-10,
            );
            assert!((mass - 1.0).abs() < 1e-6, "{shape:?}: mass {mass}");
        }
    }

    #[test]
    fn interval_prob_closed_form() {
        for shape in [KernelShape::UniformBall, KernelShape::CosineBump] {
            let kernel = NoiseKernel::new(shape, 0.05).unwrap();
            // Whole ball has probability one.
            assert!((kernel.interval_prob(-0.05, 0.05) - 1.0).abs() < 1e-14);
            // Symmetric halves.
            let left = kernel.interval_prob(-0.05, 0.0);
            let right = kernel.interval_prob(0.0, 0.05);
            assert!((left - 0.5).abs() < 1e-14);
            assert!((right - 0.5).abs() < 1e-14);
            // Against quadrature of the density on a subinterval.
            let center = PhasePoint::circle(0.5);
            let quad = adaptive_simpson(
                |t| {
                    kernel
                        .density(Space::Circle, &center, &PhasePoint::circle(t))
                        .unwrap()
                },
                0.5 + 0.01,
                0.5 + 0.04,
                1e-12,
            );
            assert!((kernel.interval_prob(0.01, 0.04) - quad).abs() < 1e-10);
        }
    }

    #[test]
    fn disk_rect_area_special_cases() {
        let r = 0.3;
        // Rect containing the disk.
        assert!((disk_rect_area(r, -1.0, 1.0, -1.0, 1.0) - PI * r * r).abs() < 1e-12);
        // Disjoint rect.
        assert_eq!(disk_rect_area(r, 0.5, 0.9, 0.5, 0.9), 0.0);
        // Half planes.
        assert!((disk_rect_area(r, -1.0, 0.0, -1.0, 1.0) - 0.5 * PI * r * r).abs() < 1e-12);
        assert!((disk_rect_area(r, -1.0, 1.0, -1.0, 0.0) - 0.5 * PI * r * r).abs() < 1e-12);
        // Quadrant.
        assert!((disk_rect_area(r, 0.0, 1.0, 0.0, 1.0) - 0.25 * PI * r * r).abs() < 1e-12);
    }

    #[test]
    fn rect_prob_matches_quadrature_oracle() {
        // Independent oracle: integrate the chord overlap by adaptive Simpson.
        let cases: [(f64, f64, f64, f64, f64); 4] = [
            (0.2, -0.05, 0.1, -0.15, 0.02),
            (0.11, 0.0, 0.2, 0.0, 0.2),
            (0.07, -0.01, 0.01, -0.2, 0.2),
            (0.15, -0.2, -0.05, -0.1, 0.12),
        ];
        for (r, x0, x1, y0, y1) in cases {
            let oracle = adaptive_simpson(
                |x: f64| {
                    let s = (r * r - x * x).max(0.0).sqrt();
                    ((y1.min(s)) - (y0.max(-s))).max(0.0)
                },
                x0.max(-r),
                x1.min(r),
                1e-12,
            );
            let exact = disk_rect_area(r, x0, x1, y0, y1);
            assert!(
                (exact - oracle).abs() < 1e-10,
                "r={r} rect=({x0},{x1})x({y0},{y1}): exact {exact} vs oracle {oracle}"
            );
        }
    }

    #[test]
    fn torus_rect_prob_sums_to_one() {
        // Tile the ball's bounding square by a 7x9 grid of rectangles.
        for shape in [KernelShape::UniformBall, KernelShape::CosineBump] {
            let eps = 0.12;
            let kernel = NoiseKernel::new(shape, eps).unwrap();
            let (nx, ny) = (7, 9);
            let mut total = 0.0;
            for i in 0..nx {
                for j in 0..ny {
                    let x0 = -eps + 2.0 * eps * i as f64 / nx as f64;
                    let x1 = -eps + 2.0 * eps * (i + 1) as f64 / nx as f64;
                    let y0 = -eps + 2.0 * eps * j as f64 / ny as f64;
                    let y1 = -eps + 2.0 * eps * (j + 1) as f64 / ny as f64;
                    total += kernel.rect_prob(x0, x1, y0, y1);
                }
            }
            assert!((total - 1.0).abs() < 1e-9, "{shape:?}: total {total}");
        }
    }

    #[test]
    fn sampled_distribution_chi_square() {
        // Goodness of fit of the 1-D displacement distribution, 20 bins.
        for shape in [KernelShape::UniformBall, KernelShape::CosineBump] {
            let eps = 0.02;
            let kernel = NoiseKernel::new(shape, eps).unwrap();
            let map = doubling();
            let x = PhasePoint::circle(0.1);
            let center = map.apply(&x).x();
            let mut rng = orbit_rng(2024, 7);
            let n = 100_000usize;
            let bins = 20usize;
            let mut counts = vec![0usize; bins];
            for _ in 0..n {
                let y = sample_step(&kernel, &map, &x, &mut rng).unwrap();
                let t = crate::phase_space::signed_circle_delta(y.x(), center);
                let b = (((t + eps) / (2.0 * eps) * bins as f64) as usize).min(bins - 1);
                counts[b] += 1;
            }
            let mut chi2 = 0.0;
            for (b, &c) in counts.iter().enumerate() {
                let lo = -eps + 2.0 * eps * b as f64 / bins as f64;
                let hi = -eps + 2.0 * eps * (b + 1) as f64 / bins as f64;
                let expected = n as f64 * kernel.interval_prob(lo, hi);
                chi2 += (c as f64 - expected).powi(2) / expected;
            }
            // df = 19; 45 is far beyond the 0.999 quantile.
            assert!(chi2 < 45.0, "{shape:?}: chi2 {chi2}");
        }
    }

    #[test]
    fn random_orbit_examples() {
        let map = doubling();
        let eps = 1e-3;
        let kernel = NoiseKernel::new(KernelShape::UniformBall, eps).unwrap();
        let x0 = PhasePoint::circle(0.1);

        let orbit = random_orbit(&kernel, &map, &x0, 1, 5, 0).unwrap();
        assert_eq!(orbit.points.len(), 2);
        assert!(dist_unchecked(&map.apply(&orbit.points[0]), &orbit.points[1]) <= eps);

        // Determinism: same seed twice gives identical sequences.
        let again = random_orbit(&kernel, &map, &x0, 200, 5, 0).unwrap();
        let again2 = random_orbit(&kernel, &map, &x0, 200, 5, 0).unwrap();
        assert_eq!(again.points, again2.points);
        // A different stream diverges.
        let other = random_orbit(&kernel, &map, &x0, 200, 5, 1).unwrap();
        assert_ne!(again.points, other.points);

        assert!(random_orbit(&kernel, &map, &x0, 0, 5, 0).is_err());
    }

    #[test]
    fn verify_pseudo_orbit_examples() {
        let map = doubling();
        // A true orbit has zero gap.
        let orbit = map.orbit(&PhasePoint::circle(0.11), 50);
        let rep = verify_pseudo_orbit(&map, &orbit, 0.0).unwrap();
        assert!(rep.valid);
        assert_eq!(rep.max_gap, 0.0);

        let seq = [PhasePoint::circle(0.1), PhasePoint::circle(0.21)];
        let rep = verify_pseudo_orbit(&map, &seq, 0.01).unwrap();
        assert!(rep.valid);
        assert!((rep.max_gap - 0.01).abs() < 1e-15);

        let seq = [PhasePoint::circle(0.1), PhasePoint::circle(0.25)];
        let rep = verify_pseudo_orbit(&map, &seq, 0.01).unwrap();
        assert!(!rep.valid);
        assert!((rep.max_gap - 0.05).abs() < 1e-15);
        assert_eq!(rep.worst_index, 0);

        assert!(verify_pseudo_orbit(&map, &seq[..1], 0.01).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn random_orbits_are_eps_pseudo_orbits(
            seed in 0u64..1000,
            x0 in 0.0f64..1.0,
            eps in 1e-4f64..0.2,
        ) {
            for (map, shape) in [
                (doubling(), KernelShape::UniformBall),
                (MapSpec::nonlinear_expanding(0.05).unwrap(), KernelShape::CosineBump),
            ] {
                let kernel = NoiseKernel::new(shape, eps).unwrap();
                let orbit = random_orbit(&kernel, &map, &PhasePoint::circle(x0), 100, seed, 0).unwrap();
                let rep = verify_pseudo_orbit(&map, &orbit.points, eps).unwrap();
                prop_assert!(rep.valid, "gap {} > eps {}", rep.max_gap, eps);
            }
        }

        #[test]
        fn cat_map_random_orbits_are_pseudo_orbits(seed in 0u64..200) {
            let map = MapSpec::cat_map();
            let kernel = NoiseKernel::new(KernelShape::UniformBall, 0.01).unwrap();
            let orbit = random_orbit(&kernel, &map, &PhasePoint::torus(0.2, 0.7), 100, seed, 3).unwrap();
            let rep = verify_pseudo_orbit(&map, &orbit.points, 0.01).unwrap();
            prop_assert!(rep.valid);
        }

        #[test]
        fn density_nonnegative_and_supported(
            c in 0.0f64..1.0,
            y in 0.0f64..1.0,
            eps in 0.01f64..0.2,
        ) {
            for shape in [KernelShape::UniformBall, KernelShape::CosineBump] {
                let kernel = NoiseKernel::new(shape, eps).unwrap();
                let center = PhasePoint::circle(c);
                let point = PhasePoint::circle(y);
                let d = kernel.density(Space::Circle, &center, &point).unwrap();
                prop_assert!(d >= 0.0);
                if circle_dist(c, y) > eps {
                    prop_assert_eq!(d, 0.0);
                }
            }
        }
    }
}
