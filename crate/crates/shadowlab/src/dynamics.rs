//! The map menu and its iteration machinery.
//!
//! Three families, all uniformly expanding or hyperbolic so the pullback
//! shadowing solvers apply:
//!
//! * linear expanding circle maps `x -> k x mod 1`, integer `k >= 2`;
//! * a nonlinear expanding family `x -> 2x + a sin(2 pi x) mod 1` with
//!   `|a| < 1/(2 pi)`, whose invariant density is genuinely non-uniform;
//! * the hyperbolic torus automorphism `v -> [[2,1],[1,1]] v mod 1`.
//!
//! The circle families expose their inverse branches (closed form for the
//! linear maps, safeguarded Newton on the lifted map for the nonlinear
//! family), which is what the backward shadowing solver consumes.

use crate::error::{Error, Result};
use crate::measures::GridMeasure;
use crate::phase_space::{circle_dist, PhasePoint, Space};
use rand::Rng;

/// The integer matrix of the torus automorphism.
pub const CAT_MATRIX: [[f64; 2]; 2] = [[2.0, 1.0], [1.0, 1.0]];

/// Newton/bisection tolerance for inverse branches of the nonlinear family.
pub const ROOT_TOL: f64 = 1e-14;

/// A concrete map together with its expansion data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MapSpec {
    /// `x -> k x mod 1`.
    LinearExpanding { k: u32 },
    /// `x -> 2 x + a sin(2 pi x) mod 1`.
    NonlinearExpanding { a: f64 },
    /// `v -> [[2,1],[1,1]] v mod 1`.
    CatMap,
}

impl MapSpec {
    pub fn linear_expanding(k: u32) -> Result<Self> {
        if k < 2 {
            return Err(Error::Usage(format!(
                "linear expanding map needs integer k >= 2, got {k}"
            )));
        }
        Ok(MapSpec::LinearExpanding { k })
    }

    pub fn nonlinear_expanding(a: f64) -> Result<Self> {
        let bound = 1.0 / (2.0 * std::f64::consts::PI);
        if !a.is_finite() || a.abs() >= bound {
            return Err(Error::Usage(format!(
                "nonlinear expanding map needs |a| < 1/(2 pi) ~= {bound:.6}, got {a}"
            )));
        }
        Ok(MapSpec::NonlinearExpanding { a })
    }

    pub fn cat_map() -> Self {
        MapSpec::CatMap
    }

    pub fn space(&self) -> Space {
        match self {
            MapSpec::CatMap => Space::Torus,
            _ => Space::Circle,
        }
    }

    /// Uniform expansion lower bound. For the cat map this is the unstable
    /// eigenvalue, computed from the matrix.
    pub fn lambda(&self) -> f64 {
        match self {
            MapSpec::LinearExpanding { k } => *k as f64,
            MapSpec::NonlinearExpanding { a } => 2.0 - 2.0 * std::f64::consts::PI * a.abs(),
            MapSpec::CatMap => cat_eigen().lambda_u,
        }
    }

    /// Uniform Lipschitz upper bound of the map.
    pub fn lipschitz(&self) -> f64 {
        match self {
            MapSpec::LinearExpanding { k } => *k as f64,
            MapSpec::NonlinearExpanding { a } => 2.0 + 2.0 * std::f64::consts::PI * a.abs(),
            // Spectral norm of the symmetric matrix = unstable eigenvalue.
            MapSpec::CatMap => cat_eigen().lambda_u,
        }
    }

    /// Covering degree of the circle families; the cat map has no monotone
    /// laps so asking for its degree is a usage error.
    pub fn degree(&self) -> Result<u32> {
        match self {
            MapSpec::LinearExpanding { k } => Ok(*k),
            MapSpec::NonlinearExpanding { .. } => Ok(2),
            MapSpec::CatMap => Err(Error::Usage(
                "inverse branches are defined only for circle-expanding maps".into(),
            )),
        }
    }

    pub fn is_circle_expanding(&self) -> bool {
        !matches!(self, MapSpec::CatMap)
    }

    /// Lift of a circle family to the real line, `F: [0,1] -> [0, degree]`.
    fn lift(&self, x: f64) -> f64 {
        match self {
            MapSpec::LinearExpanding { k } => *k as f64 * x,
            MapSpec::NonlinearExpanding { a } => {
                2.0 * x + a * (2.0 * std::f64::consts::PI * x).sin()
            }
            MapSpec::CatMap => unreachable!("lift is a circle-family operation"),
        }
    }

    fn lift_derivative(&self, x: f64) -> f64 {
        match self {
            MapSpec::LinearExpanding { k } => *k as f64,
            MapSpec::NonlinearExpanding { a } => {
                2.0 + 2.0 * std::f64::consts::PI * a * (2.0 * std::f64::consts::PI * x).cos()
            }
            MapSpec::CatMap => unreachable!(),
        }
    }

    /// One application of the map; the image is canonical.
    pub fn apply(&self, p: &PhasePoint) -> PhasePoint {
        debug_assert_eq!(p.dim(), self.space().dimension());
        match self {
            MapSpec::LinearExpanding { .. } | MapSpec::NonlinearExpanding { .. } => {
                PhasePoint::circle(self.lift(p.x()))
            }
            MapSpec::CatMap => {
                let (x, y) = (p.x(), p.y());
                PhasePoint::torus(
                    CAT_MATRIX[0][0] * x + CAT_MATRIX[0][1] * y,
                    CAT_MATRIX[1][0] * x + CAT_MATRIX[1][1] * y,
                )
            }
        }
    }

    /// The orbit `(z, f(z), ..., f^n(z))`, `n + 1` points.
    pub fn orbit(&self, z0: &PhasePoint, n: usize) -> Vec<PhasePoint> {
        let mut out = Vec::with_capacity(n + 1);
        let mut z = *z0;
        out.push(z);
        for _ in 0..n {
            z = self.apply(&z);
            out.push(z);
        }
        out
    }

    /// Preimage of `y` in the `branch`-th monotone lap of a circle family.
    ///
    /// Linear maps solve in closed form; the nonlinear family runs Newton with
    /// a bisection safeguard on the lift, to absolute tolerance `ROOT_TOL`.
    pub fn inverse_branch(&self, y: &PhasePoint, branch: u32) -> Result<PhasePoint> {
        let degree = self.degree()?;
        if branch >= degree {
            return Err(Error::Usage(format!(
                "branch {branch} out of range for degree {degree}"
            )));
        }
        debug_assert_eq!(y.dim(), 1);
        match self {
            MapSpec::LinearExpanding { k } => {
                Ok(PhasePoint::circle((y.x() + branch as f64) / *k as f64))
            }
            MapSpec::NonlinearExpanding { .. } => {
                let target = y.x() + branch as f64;
                let x = self.invert_lift(target)?;
                Ok(PhasePoint::circle(x))
            }
            MapSpec::CatMap => unreachable!(),
        }
    }

    /// Solve `lift(x) = target` for `x` in `[0, 1]`, `target` in `[0, degree]`.
    fn invert_lift(&self, target: f64) -> Result<f64> {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut x = target / self.lift(1.0); // linear first guess
        for _ in 0..200 {
            let fx = self.lift(x) - target;
            if fx.abs() == 0.0 {
                return Ok(x);
            }
            if fx < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let step = fx / self.lift_derivative(x);
            let mut next = x - step;
            if !(lo..=hi).contains(&next) {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() <= ROOT_TOL {
                return Ok(next);
            }
            x = next;
        }
        Err(Error::Numerical(format!(
            "inverse branch root finder did not converge for target {target}"
        )))
    }

    /// Among all preimages of `y`, the one closest to `anchor` in the
    /// wraparound metric. An exact tie is resolved toward the smallest
    /// branch index and flagged.
    pub fn nearest_inverse_branch(
        &self,
        y: &PhasePoint,
        anchor: &PhasePoint,
    ) -> Result<BranchChoice> {
        let degree = self.degree()?;
        let mut best: Option<BranchChoice> = None;
        let mut best_dist = f64::INFINITY;
        for branch in 0..degree {
            let candidate = self.inverse_branch(y, branch)?;
            let d = circle_dist(candidate.x(), anchor.x());
            if d < best_dist {
                best_dist = d;
                best = Some(BranchChoice {
                    point: candidate,
                    branch,
                    tie: false,
                });
            } else if d == best_dist {
                if let Some(b) = best.as_mut() {
                    b.tie = true;
                }
            }
        }
        Ok(best.expect("degree >= 2 guarantees a candidate"))
    }
}

/// Result of nearest-preimage selection.
#[derive(Clone, Copy, Debug)]
pub struct BranchChoice {
    pub point: PhasePoint,
    pub branch: u32,
    /// Two preimages were exactly equidistant from the anchor.
    pub tie: bool,
}

/// Eigen-structure of the cat-map matrix, computed from the entries rather
/// than hard-coded.
#[derive(Clone, Copy, Debug)]
pub struct CatEigen {
    pub lambda_u: f64,
    pub lambda_s: f64,
    /// Unit eigenvector of the unstable direction.
    pub e_u: [f64; 2],
    /// Unit eigenvector of the stable direction.
    pub e_s: [f64; 2],
    /// Condition factor of the eigenbasis (1 for this symmetric matrix).
    pub kappa: f64,
}

/// Eigen-decomposition of the symmetric 2x2 `CAT_MATRIX`.
pub fn cat_eigen() -> CatEigen {
    let [[a, b], [c, d]] = CAT_MATRIX;
    debug_assert_eq!(b, c);
    let tr = a + d;
    let det = a * d - b * c;
    let disc = (tr * tr - 4.0 * det).sqrt();
    let lambda_u = 0.5 * (tr + disc);
    let lambda_s = 0.5 * (tr - disc);
    let unit = |v: [f64; 2]| {
        let n = v[0].hypot(v[1]);
        [v[0] / n, v[1] / n]
    };
    // (A - lambda I) v = 0 with b != 0 gives v = (b, lambda - a).
    let e_u = unit([b, lambda_u - a]);
    let e_s = unit([b, lambda_s - a]);
    // Condition factor of the eigenvector matrix V = [e_u e_s]: ratio of its
    // singular values, from the eigenvalues of V^T V.
    let g11 = 1.0;
    let g22 = 1.0;
    let g12 = e_u[0] * e_s[0] + e_u[1] * e_s[1];
    let mean = 0.5 * (g11 + g22);
    let dev = (0.25 * (g11 - g22) * (g11 - g22) + g12 * g12).sqrt();
    let kappa = ((mean + dev) / (mean - dev)).sqrt();
    CatEigen {
        lambda_u,
        lambda_s,
        e_u,
        e_s,
        kappa,
    }
}

/// Reference measure a run compares against: normalized Lebesgue, or a grid
/// density computed by the transfer-operator fixed point at zero noise.
#[derive(Clone, Debug)]
pub enum ReferenceMeasure {
    Lebesgue(Space),
    UlamAcim(GridMeasure),
}

impl ReferenceMeasure {
    pub fn space(&self) -> Space {
        match self {
            ReferenceMeasure::Lebesgue(s) => *s,
            ReferenceMeasure::UlamAcim(g) => g.space(),
        }
    }
}

/// Exact orbit sampler for typical points of the linear families.
///
/// Every `f64` in `[0,1)` is a dyadic rational, and under `x -> k x mod 1`
/// with `k` a power of the float base the exact orbit of such a point is
/// eventually the fixed point 0 — float iteration of these maps is exact and
/// therefore statistically atypical. A Lebesgue-random point instead has an
/// i.i.d. uniform digit expansion in base `k`, and its exact orbit is read
/// off by sliding a window along that digit stream. This stream generates
/// the orbit of such a point, each iterate truncated at roughly 2^-60.
pub struct TypicalOrbitStream<R: Rng> {
    base: u64,
    scale: f64,     // base^window_len
    window: u128,   // current window of digits, most significant first
    head_pow: u128, // base^(window_len - 1)
    rng: R,
}

impl<R: Rng> TypicalOrbitStream<R> {
    /// Only linear expanding maps are supported; other families iterate
    /// faithfully in floating point already.
    pub fn new(map: &MapSpec, mut rng: R) -> Result<Self> {
        let base = match map {
            MapSpec::LinearExpanding { k } => *k as u64,
            _ => {
                return Err(Error::Usage(
                    "typical-orbit digit stream applies to linear expanding maps only".into(),
                ))
            }
        };
        // Largest window with base^len <= 2^63.
        let mut window_len = 0u32;
        let mut pow: u128 = 1;
        while pow.checked_mul(base as u128).map_or(false, |p| p <= 1u128 << 63) {
            pow *= base as u128;
            window_len += 1;
        }
        let mut window: u128 = 0;
        for _ in 0..window_len {
            window = window * base as u128 + rng.random_range(0..base) as u128;
        }
        Ok(TypicalOrbitStream {
            base,
            scale: pow as f64,
            window,
            head_pow: pow / base as u128,
            rng,
        })
    }

    /// Current orbit point; `advance` moves to its image under the map.
    pub fn current(&self) -> PhasePoint {
        PhasePoint::circle(self.window as f64 / self.scale)
    }

    /// Step the orbit: drop the leading digit, append a fresh one.
    pub fn advance(&mut self) {
        let head = self.window / self.head_pow;
        self.window = (self.window - head * self.head_pow) * self.base as u128
            + self.rng.random_range(0..self.base) as u128;
    }
}
