//! Measures, observables, and computable weak-* distances.
//!
//! Empirical measures are finite weighted atom sets; grid measures carry
//! per-cell masses on a uniform partition. Observables are trigonometric
//! polynomials, which makes three things exact: their Lebesgue integral
//! (the constant coefficient), an upper bound on `sup |phi|`, and a
//! Lipschitz-constant bound. Weak-* closeness is reported two ways — the
//! exact Wasserstein-1 distance on the circle (via lifted CDFs and a
//! weighted median over rotations), and a dictionary gap: the largest
//! normalized observable discrepancy over a fixed dictionary.

use crate::dynamics::{MapSpec, ReferenceMeasure};
use crate::error::{Error, Result};
use crate::numerics::KahanSum;
use crate::phase_space::{PhasePoint, Space};
use std::f64::consts::PI;

/// Tolerance for "weights sum to one" checks.
pub const MASS_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Empirical measures
// ---------------------------------------------------------------------------

/// A finite weighted point set; weights are positive and sum to one.
#[derive(Clone, Debug)]
pub struct EmpiricalMeasure {
    space: Space,
    atoms: Vec<(PhasePoint, f64)>,
}

impl EmpiricalMeasure {
    /// Validate and wrap explicit atoms.
    pub fn new(atoms: Vec<(PhasePoint, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Usage("an empirical measure needs atoms".into()));
        }
        let dim = atoms[0].0.dim();
        if atoms.iter().any(|(p, _)| p.dim() != dim) {
            return Err(Error::Usage("mixed-dimension atoms".into()));
        }
        if atoms.iter().any(|(_, w)| !w.is_finite() || *w <= 0.0) {
            return Err(Error::Usage("atom weights must be positive".into()));
        }
        let mut sum = KahanSum::new();
        for (_, w) in &atoms {
            sum.add(*w);
        }
        if (sum.value() - 1.0).abs() > MASS_TOL {
            return Err(Error::Usage(format!(
                "atom weights sum to {} (must be 1 within {MASS_TOL})",
                sum.value()
            )));
        }
        let space = atoms[0].0.space();
        Ok(EmpiricalMeasure { space, atoms })
    }

    /// Equal-weight atoms on a nonempty point sequence: the empirical
    /// measure of the sequence.
    pub fn from_points(points: &[PhasePoint]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Usage("empty point sequence".into()));
        }
        let w = 1.0 / points.len() as f64;
        Self::new(points.iter().map(|p| (*p, w)).collect())
    }

    /// The Dirac mass at a point.
    pub fn dirac(p: PhasePoint) -> Self {
        EmpiricalMeasure {
            space: p.space(),
            atoms: vec![(p, 1.0)],
        }
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn atoms(&self) -> &[(PhasePoint, f64)] {
        &self.atoms
    }
}

/// The empirical measure of a (pseudo-)orbit segment.
pub fn empirical_from_sequence(seq: &[PhasePoint]) -> Result<EmpiricalMeasure> {
    EmpiricalMeasure::from_points(seq)
}

// ---------------------------------------------------------------------------
// Grid measures
// ---------------------------------------------------------------------------

/// Per-cell probability masses on the uniform partition with `cells_per_dim`
/// cells in each coordinate. Torus cells are indexed row-major:
/// `idx = iy * k + ix`, cell `[ix/k, (ix+1)/k) x [iy/k, (iy+1)/k)`.
#[derive(Clone, Debug)]
pub struct GridMeasure {
    space: Space,
    cells_per_dim: usize,
    masses: Vec<f64>,
}

impl GridMeasure {
    pub fn new(space: Space, cells_per_dim: usize, masses: Vec<f64>) -> Result<Self> {
        let expect = cells_per_dim.pow(space.dimension() as u32);
        if cells_per_dim == 0 || masses.len() != expect {
            return Err(Error::Usage(format!(
                "grid measure on {space:?} with k={cells_per_dim} needs {expect} masses, got {}",
                masses.len()
            )));
        }
        if masses.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::Usage("cell masses must be nonnegative".into()));
        }
        let total = crate::numerics::kahan_sum(&masses);
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Usage(format!(
                "cell masses sum to {total} (must be 1 within {MASS_TOL})"
            )));
        }
        Ok(GridMeasure {
            space,
            cells_per_dim,
            masses,
        })
    }

    pub fn uniform(space: Space, cells_per_dim: usize) -> Self {
        let n = cells_per_dim.pow(space.dimension() as u32);
        GridMeasure {
            space,
            cells_per_dim,
            masses: vec![1.0 / n as f64; n],
        }
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn cells_per_dim(&self) -> usize {
        self.cells_per_dim
    }

    pub fn cell_count(&self) -> usize {
        self.masses.len()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn cell_center(&self, idx: usize) -> PhasePoint {
        let k = self.cells_per_dim;
        match self.space {
            Space::Circle => PhasePoint::circle((idx as f64 + 0.5) / k as f64),
            Space::Torus => {
                let ix = idx % k;
                let iy = idx / k;
                PhasePoint::torus((ix as f64 + 0.5) / k as f64, (iy as f64 + 0.5) / k as f64)
            }
        }
    }

    /// Index of the cell containing a canonical point.
    pub fn cell_index(&self, p: &PhasePoint) -> usize {
        let k = self.cells_per_dim;
        let coord = |x: f64| ((x * k as f64) as usize).min(k - 1);
        match self.space {
            Space::Circle => coord(p.x()),
            Space::Torus => coord(p.y()) * k + coord(p.x()),
        }
    }
}

// ---------------------------------------------------------------------------
// Observables
// ---------------------------------------------------------------------------

/// One trigonometric factor along a single coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Harmonic {
    Const,
    Cos(u32),
    Sin(u32),
}

impl Harmonic {
    fn eval(&self, x: f64) -> f64 {
        match self {
            Harmonic::Const => 1.0,
            Harmonic::Cos(k) => (2.0 * PI * *k as f64 * x).cos(),
            Harmonic::Sin(k) => (2.0 * PI * *k as f64 * x).sin(),
        }
    }

    fn frequency(&self) -> u32 {
        match self {
            Harmonic::Const => 0,
            Harmonic::Cos(k) | Harmonic::Sin(k) => *k,
        }
    }

    fn label(&self, axis: &str) -> String {
        match self {
            Harmonic::Const => "1".into(),
            Harmonic::Cos(k) => format!("cos{k}{axis}"),
            Harmonic::Sin(k) => format!("sin{k}{axis}"),
        }
    }
}

/// One product term of a trigonometric polynomial.
#[derive(Clone, Copy, Debug)]
pub struct Term {
    pub coeff: f64,
    /// Per-coordinate factors; the second is `Const` on the circle.
    pub factors: [Harmonic; 2],
}

/// A trigonometric polynomial observable, with computable bounds on its sup
/// norm and Lipschitz constant.
#[derive(Clone, Debug)]
pub struct Observable {
    space: Space,
    terms: Vec<Term>,
    label: String,
}

impl Observable {
    pub fn new(space: Space, terms: Vec<Term>, label: impl Into<String>) -> Result<Self> {
        if terms.iter().any(|t| !t.coeff.is_finite()) {
            return Err(Error::Usage("non-finite observable coefficient".into()));
        }
        if space == Space::Circle && terms.iter().any(|t| t.factors[1] != Harmonic::Const) {
            return Err(Error::Usage(
                "circle observables cannot carry a second-coordinate factor".into(),
            ));
        }
        Ok(Observable {
            space,
            terms,
            label: label.into(),
        })
    }

    pub fn constant(space: Space, c: f64) -> Self {
        Observable {
            space,
            terms: vec![Term {
                coeff: c,
                factors: [Harmonic::Const, Harmonic::Const],
            }],
            label: if c == 1.0 { "1".into() } else { format!("{c}") },
        }
    }

    /// `cos(2 pi k x)` on the circle.
    pub fn circle_cos(k: u32) -> Self {
        Observable {
            space: Space::Circle,
            terms: vec![Term {
                coeff: 1.0,
                factors: [Harmonic::Cos(k), Harmonic::Const],
            }],
            label: format!("cos{k}x"),
        }
    }

    /// `sin(2 pi k x)` on the circle.
    pub fn circle_sin(k: u32) -> Self {
        Observable {
            space: Space::Circle,
            terms: vec![Term {
                coeff: 1.0,
                factors: [Harmonic::Sin(k), Harmonic::Const],
            }],
            label: format!("sin{k}x"),
        }
    }

    /// Tensor product of one harmonic per torus coordinate.
    pub fn torus_product(hx: Harmonic, hy: Harmonic) -> Self {
        let label = match (hx, hy) {
            (Harmonic::Const, Harmonic::Const) => "1".to_string(),
            (Harmonic::Const, hy) => hy.label("y"),
            (hx, Harmonic::Const) => hx.label("x"),
            (hx, hy) => format!("{}*{}", hx.label("x"), hy.label("y")),
        };
        Observable {
            space: Space::Torus,
            terms: vec![Term {
                coeff: 1.0,
                factors: [hx, hy],
            }],
            label,
        }
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, p: &PhasePoint) -> Result<f64> {
        if p.dim() != self.space.dimension() {
            return Err(Error::Usage(format!(
                "observable '{}' on {:?} evaluated at a {}-dimensional point",
                self.label,
                self.space,
                p.dim()
            )));
        }
        Ok(self.eval_unchecked(p))
    }

    pub(crate) fn eval_unchecked(&self, p: &PhasePoint) -> f64 {
        let mut acc = 0.0;
        for t in &self.terms {
            let mut v = t.coeff * t.factors[0].eval(p.x());
            if self.space == Space::Torus {
                v *= t.factors[1].eval(p.y());
            }
            acc += v;
        }
        acc
    }

    /// Upper bound for `sup |phi|`: the sum of absolute coefficients.
    pub fn sup_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.abs()).sum()
    }

    /// Lipschitz-constant bound with respect to the wraparound metric:
    /// each product term `c g(x) h(y)` contributes `|c| 2 pi |k|_2`.
    pub fn lip_const(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let kx = t.factors[0].frequency() as f64;
                let ky = t.factors[1].frequency() as f64;
                t.coeff.abs() * 2.0 * PI * kx.hypot(ky)
            })
            .sum()
    }

    /// The Lebesgue integral: nonconstant harmonics integrate to zero, so
    /// only all-constant terms survive. Exact.
    pub fn constant_coefficient(&self) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.factors[0] == Harmonic::Const && t.factors[1] == Harmonic::Const)
            .map(|t| t.coeff)
            .sum()
    }
}

/// The standard observable dictionary: `{1} ∪ {cos(2 pi k x), sin(2 pi k x)}`
/// up to `max_freq` on the circle, and all tensor products of per-axis
/// harmonics with frequency at most `max_freq` on the torus.
pub fn standard_dictionary(space: Space, max_freq: u32) -> Vec<Observable> {
    match space {
        Space::Circle => {
            let mut dict = vec![Observable::constant(space, 1.0)];
            for k in 1..=max_freq {
                dict.push(Observable::circle_cos(k));
                dict.push(Observable::circle_sin(k));
            }
            dict
        }
        Space::Torus => {
            let mut axis = vec![Harmonic::Const];
            for k in 1..=max_freq {
                axis.push(Harmonic::Cos(k));
                axis.push(Harmonic::Sin(k));
            }
            let mut dict = Vec::with_capacity(axis.len() * axis.len());
            for &hx in &axis {
                for &hy in &axis {
                    dict.push(Observable::torus_product(hx, hy));
                }
            }
            dict
        }
    }
}

// ---------------------------------------------------------------------------
// Integration
// ---------------------------------------------------------------------------

/// A borrowed measure of any of the three representations.
#[derive(Clone, Copy, Debug)]
pub enum MeasureView<'a> {
    Empirical(&'a EmpiricalMeasure),
    Grid(&'a GridMeasure),
    Reference(&'a ReferenceMeasure),
}

impl<'a> From<&'a EmpiricalMeasure> for MeasureView<'a> {
    fn from(m: &'a EmpiricalMeasure) -> Self {
        MeasureView::Empirical(m)
    }
}

impl<'a> From<&'a GridMeasure> for MeasureView<'a> {
    fn from(m: &'a GridMeasure) -> Self {
        MeasureView::Grid(m)
    }
}

impl<'a> From<&'a ReferenceMeasure> for MeasureView<'a> {
    fn from(m: &'a ReferenceMeasure) -> Self {
        MeasureView::Reference(m)
    }
}

impl MeasureView<'_> {
    pub fn space(&self) -> Space {
        match self {
            MeasureView::Empirical(m) => m.space(),
            MeasureView::Grid(m) => m.space(),
            MeasureView::Reference(m) => m.space(),
        }
    }
}

/// Integrate an observable: weighted atom sum for empirical measures,
/// cell-center midpoint rule for grid measures, and the exact constant
/// coefficient against Lebesgue.
pub fn integrate<'a>(measure: impl Into<MeasureView<'a>>, phi: &Observable) -> Result<f64> {
    let view = measure.into();
    if view.space() != phi.space() {
        return Err(Error::Usage(format!(
            "integrating a {:?} observable against a {:?} measure",
            phi.space(),
            view.space()
        )));
    }
    Ok(match view {
        MeasureView::Empirical(m) => {
            let mut acc = KahanSum::new();
            for (p, w) in m.atoms() {
                acc.add(w * phi.eval_unchecked(p));
            }
            acc.value()
        }
        MeasureView::Grid(g) => {
            let mut acc = KahanSum::new();
            for (i, m) in g.masses().iter().enumerate() {
                acc.add(m * phi.eval_unchecked(&g.cell_center(i)));
            }
            acc.value()
        }
        MeasureView::Reference(ReferenceMeasure::Lebesgue(_)) => phi.constant_coefficient(),
        MeasureView::Reference(ReferenceMeasure::UlamAcim(g)) => {
            integrate(MeasureView::Grid(g), phi)?
        }
    })
}

/// Time average of `phi` along the orbit of `z0`: the integral of `phi`
/// against the empirical measure of `(z0, ..., f^n(z0))`, computed
/// streaming.
pub fn birkhoff_average(map: &MapSpec, z0: &PhasePoint, n: usize, phi: &Observable) -> Result<f64> {
    if phi.space() != map.space() || z0.dim() != map.space().dimension() {
        return Err(Error::Usage("birkhoff average: space mismatch".into()));
    }
    let mut acc = KahanSum::new();
    let mut z = *z0;
    acc.add(phi.eval_unchecked(&z));
    for _ in 0..n {
        z = map.apply(&z);
        acc.add(phi.eval_unchecked(&z));
    }
    Ok(acc.value() / (n + 1) as f64)
}

// ---------------------------------------------------------------------------
// Wasserstein-1 on the circle
// ---------------------------------------------------------------------------

fn circle_atom_list(view: MeasureView<'_>) -> Result<Vec<(f64, f64)>> {
    if view.space() != Space::Circle {
        return Err(Error::Usage(
            "wasserstein1_circle is defined on circle measures only".into(),
        ));
    }
    match view {
        MeasureView::Empirical(m) => Ok(m.atoms().iter().map(|(p, w)| (p.x(), *w)).collect()),
        MeasureView::Grid(g) => Ok(g
            .masses()
            .iter()
            .enumerate()
            .map(|(i, m)| (g.cell_center(i).x(), *m))
            .collect()),
        MeasureView::Reference(ReferenceMeasure::UlamAcim(g)) => {
            circle_atom_list(MeasureView::Grid(g))
        }
        MeasureView::Reference(ReferenceMeasure::Lebesgue(_)) => Err(Error::Usage(
            "wasserstein1_circle needs an atomic (empirical or grid) measure".into(),
        )),
    }
}

/// Exact Wasserstein-1 distance between two circle measures.
///
/// With `F`, `G` the CDFs of the measures lifted at 0, the distance is
/// `min_c ∫ |F - G - c|`; the optimal `c` is a weighted median of the
/// piecewise-constant difference. Cost is one sort.
pub fn wasserstein1_circle<'a, 'b>(
    mu: impl Into<MeasureView<'a>>,
    nu: impl Into<MeasureView<'b>>,
) -> Result<f64> {
    let a = circle_atom_list(mu.into())?;
    let b = circle_atom_list(nu.into())?;

    // Signed CDF jumps: +w for mu, -w for nu.
    let mut events: Vec<(f64, f64)> = Vec::with_capacity(a.len() + b.len());
    events.extend(a.iter().map(|&(x, w)| (x, w)));
    events.extend(b.iter().map(|&(x, w)| (x, -w)));
    events.sort_unstable_by(|p, q| p.0.partial_cmp(&q.0).unwrap());

    // Piecewise-constant difference G(t) on segments between event positions;
    // the final segment wraps around to the first event.
    let mut segments: Vec<(f64, f64)> = Vec::new(); // (value, length)
    let mut cum = KahanSum::new();
    let mut i = 0;
    while i < events.len() {
        let pos = events[i].0;
        while i < events.len() && events[i].0 == pos {
            cum.add(events[i].1);
            i += 1;
        }
        let next = if i < events.len() {
            events[i].0
        } else {
            events[0].0 + 1.0
        };
        segments.push((cum.value(), next - pos));
    }

    // Weighted median of the segment values minimizes sum len * |g - c|.
    let mut by_value = segments.clone();
    by_value.sort_unstable_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    let total: f64 = by_value.iter().map(|s| s.1).sum();
    let mut acc = 0.0;
    let mut median = by_value[by_value.len() - 1].0;
    for (v, len) in &by_value {
        acc += len;
        if acc >= 0.5 * total {
            median = *v;
            break;
        }
    }

    let mut dist = KahanSum::new();
    for (v, len) in &segments {
        dist.add(len * (v - median).abs());
    }
    Ok(dist.value().max(0.0))
}

// ---------------------------------------------------------------------------
// Dictionary gap
// ---------------------------------------------------------------------------

/// Discrepancy of one observable between two measures.
#[derive(Clone, Debug)]
pub struct ObservableGap {
    pub label: String,
    /// `|∫ phi dmu - ∫ phi dnu|`.
    pub raw: f64,
    pub lip: f64,
    /// `raw / (lip + 1)`.
    pub normalized: f64,
}

/// Observable-wise weak-* closeness report over a dictionary.
#[derive(Clone, Debug)]
pub struct DictionaryGap {
    pub max_normalized: f64,
    pub per_observable: Vec<ObservableGap>,
}

/// Per-observable gaps `|∫ phi dmu - ∫ phi dnu|`, each normalized by
/// `lip_const + 1`, and their maximum.
pub fn dictionary_gap<'a, 'b>(
    mu: impl Into<MeasureView<'a>>,
    nu: impl Into<MeasureView<'b>>,
    dictionary: &[Observable],
) -> Result<DictionaryGap> {
    if dictionary.is_empty() {
        return Err(Error::Usage("dictionary_gap needs observables".into()));
    }
    let mu = mu.into();
    let nu = nu.into();
    let mut per = Vec::with_capacity(dictionary.len());
    let mut max_normalized = 0.0f64;
    for phi in dictionary {
        let raw = (integrate(mu, phi)? - integrate(nu, phi)?).abs();
        let lip = phi.lip_const();
        let normalized = raw / (lip + 1.0);
        max_normalized = max_normalized.max(normalized);
        per.push(ObservableGap {
            label: phi.label().to_string(),
            raw,
            lip,
            normalized,
        });
    }
    Ok(DictionaryGap {
        max_normalized,
        per_observable: per,
    })
}
