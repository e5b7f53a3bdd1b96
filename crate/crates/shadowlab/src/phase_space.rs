//! Compact phase spaces: the circle and the flat two-torus.
//!
//! Points are stored with every coordinate in `[0, 1)`; construction and all
//! arithmetic canonicalize. The metric is the wraparound (quotient) metric:
//! per-coordinate circle distance, combined by the Euclidean norm on the
//! torus. Everything here is a pure value type.

use crate::error::{Error, Result};

/// Reduce a finite coordinate into `[0, 1)`.
///
/// `rem_euclid(1.0)` can round to exactly `1.0` for tiny negative inputs,
/// which would break cell indexing downstream, so that case folds to `0.0`.
pub fn wrap_unit(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Signed displacement from `b` to `a` along the circle, in `[-0.5, 0.5]`.
pub fn signed_circle_delta(a: f64, b: f64) -> f64 {
    let d = a - b;
    d - d.round()
}

/// Wraparound distance between two circle coordinates.
pub fn circle_dist(a: f64, b: f64) -> f64 {
    signed_circle_delta(a, b).abs()
}

/// Which compact space a point or measure lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    Circle,
    Torus,
}

impl Space {
    pub fn dimension(&self) -> usize {
        match self {
            Space::Circle => 1,
            Space::Torus => 2,
        }
    }

    /// Largest possible distance: 1/2 on the circle, sqrt(1/2) on the torus.
    pub fn diameter(&self) -> f64 {
        match self {
            Space::Circle => 0.5,
            Space::Torus => 0.5f64.sqrt(),
        }
    }

    /// Wraparound metric. Errors if either point lives on the other space.
    pub fn dist(&self, a: &PhasePoint, b: &PhasePoint) -> Result<f64> {
        if a.dim() != self.dimension() || b.dim() != self.dimension() {
            return Err(Error::Usage(format!(
                "dist on {:?} needs {}-dimensional points, got {} and {}",
                self,
                self.dimension(),
                a.dim(),
                b.dim()
            )));
        }
        Ok(dist_unchecked(a, b))
    }
}

/// Metric on points already known to share a space.
pub(crate) fn dist_unchecked(a: &PhasePoint, b: &PhasePoint) -> f64 {
    debug_assert_eq!(a.dim(), b.dim());
    match a.dim() {
        1 => circle_dist(a.coords[0], b.coords[0]),
        _ => {
            let dx = signed_circle_delta(a.coords[0], b.coords[0]);
            let dy = signed_circle_delta(a.coords[1], b.coords[1]);
            dx.hypot(dy)
        }
    }
}

/// A point on the circle (one coordinate) or the torus (two coordinates),
/// always canonical: each coordinate in `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhasePoint {
    coords: [f64; 2],
    dim: u8,
}

impl PhasePoint {
    /// Circle point; wraps the coordinate into `[0, 1)`.
    pub fn circle(x: f64) -> Self {
        debug_assert!(x.is_finite());
        PhasePoint {
            coords: [wrap_unit(x), 0.0],
            dim: 1,
        }
    }

    /// Torus point; wraps both coordinates into `[0, 1)`.
    pub fn torus(x: f64, y: f64) -> Self {
        debug_assert!(x.is_finite() && y.is_finite());
        PhasePoint {
            coords: [wrap_unit(x), wrap_unit(y)],
            dim: 2,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn space(&self) -> Space {
        if self.dim == 1 {
            Space::Circle
        } else {
            Space::Torus
        }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim as usize]
    }

    /// First coordinate.
    pub fn x(&self) -> f64 {
        self.coords[0]
    }

    /// Second coordinate; only meaningful on the torus.
    pub fn y(&self) -> f64 {
        debug_assert_eq!(self.dim, 2);
        self.coords[1]
    }
}

/// Canonicalize a raw coordinate tuple into a `PhasePoint`.
///
/// Accepts one or two finite coordinates; each is reduced mod 1 into
/// `[0, 1)`. Idempotent on already-canonical input.
pub fn canonicalize(raw: &[f64]) -> Result<PhasePoint> {
    if raw.iter().any(|c| !c.is_finite()) {
        return Err(Error::Usage(format!("non-finite coordinate in {raw:?}")));
    }
    match raw {
        [x] => Ok(PhasePoint::circle(*x)),
        [x, y] => Ok(PhasePoint::torus(*x, *y)),
        _ => Err(Error::Usage(format!(
            "a point needs 1 or 2 coordinates, got {}",
            raw.len()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn canonicalize_examples() {
        assert!((canonicalize(&[1.25]).unwrap().x() - 0.25).abs() < 1e-15);
        assert!((canonicalize(&[-0.1]).unwrap().x() - 0.9).abs() < 1e-15);
        assert_eq!(canonicalize(&[0.5]).unwrap().x(), 0.5);
    }

    #[test]
    fn canonicalize_rejects_bad_input() {
        assert!(canonicalize(&[f64::NAN]).is_err());
        assert!(canonicalize(&[f64::INFINITY, 0.0]).is_err());
        assert!(canonicalize(&[]).is_err());
        assert!(canonicalize(&[0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn wrap_never_returns_one() {
        // A tiny negative input makes rem_euclid round up to 1.0.
        let x = -1e-18;
        let w = wrap_unit(x);
        assert!((0.0..1.0).contains(&w));
    }

    #[test]
    fn circle_distance_examples() {
        let s = Space::Circle;
        let a = PhasePoint::circle(0.1);
        let b = PhasePoint::circle(0.9);
        assert!((s.dist(&a, &b).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(s.dist(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn torus_distance_examples() {
        let s = Space::Torus;
        let a = PhasePoint::torus(0.0, 0.0);
        let b = PhasePoint::torus(0.5, 0.5);
        assert!((s.dist(&a, &b).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((s.dist(&a, &b).unwrap() - s.diameter()).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_usage_error() {
        let s = Space::Circle;
        let a = PhasePoint::circle(0.1);
        let b = PhasePoint::torus(0.1, 0.2);
        assert!(s.dist(&a, &b).is_err());
    }

    proptest! {
        #[test]
        fn canonicalize_is_idempotent(x in -50.0f64..50.0, y in -50.0f64..50.0) {
            let p = canonicalize(&[x, y]).unwrap();
            let q = canonicalize(p.coords()).unwrap();
            prop_assert_eq!(p, q);
        }

        #[test]
        fn circle_metric_axioms(a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0) {
            let s = Space::Circle;
            let pa = PhasePoint::circle(a);
            let pb = PhasePoint::circle(b);
            let pc = PhasePoint::circle(c);
            let dab = s.dist(&pa, &pb).unwrap();
            let dba = s.dist(&pb, &pa).unwrap();
            let dac = s.dist(&pa, &pc).unwrap();
            let dcb = s.dist(&pc, &pb).unwrap();
            prop_assert!(dab >= 0.0 && dab <= s.diameter() + 1e-15);
            prop_assert!((dab - dba).abs() < 1e-15);
            prop_assert!(dab <= dac + dcb + 1e-12);
            prop_assert!((s.dist(&pa, &pa).unwrap()).abs() == 0.0);
        }

        #[test]
        fn torus_metric_axioms(
            a in prop::array::uniform2(0.0f64..1.0),
            b in prop::array::uniform2(0.0f64..1.0),
            c in prop::array::uniform2(0.0f64..1.0),
        ) {
            let s = Space::Torus;
            let pa = PhasePoint::torus(a[0], a[1]);
            let pb = PhasePoint::torus(b[0], b[1]);
            let pc = PhasePoint::torus(c[0], c[1]);
            let dab = s.dist(&pa, &pb).unwrap();
            prop_assert!(dab <= s.diameter() + 1e-15);
            prop_assert!((dab - s.dist(&pb, &pa).unwrap()).abs() < 1e-15);
            prop_assert!(dab <= s.dist(&pa, &pc).unwrap() + s.dist(&pc, &pb).unwrap() + 1e-12);
        }

        #[test]
        fn distance_zero_iff_equal_after_canonicalization(x in -5.0f64..5.0) {
            let p = PhasePoint::circle(x);
            let q = PhasePoint::circle(x + 3.0); // same point after wrap
            prop_assert!(circle_dist(p.x(), q.x()) < 1e-12);
        }
    }
}
