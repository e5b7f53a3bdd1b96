//! shadowlab: a numerical laboratory for shadowing and noise-perturbed
//! dynamics on the circle and the two-torus.
//!
//! The pieces fit together like this:
//!
//! * [`phase_space`] — compact phase spaces with the wraparound metric;
//! * [`dynamics`] — expanding circle maps and the hyperbolic torus
//!   automorphism, with inverse branches and exact typical-orbit streams;
//! * [`noise`] — ball-supported transition kernels, random orbits of the
//!   perturbed chain, pseudo-orbit verification;
//! * [`shadowing`] — constructive finite-horizon shadowing solvers with
//!   certificates, and the per-map shadowing modulus;
//! * [`measures`] — empirical and grid measures, trigonometric observables,
//!   Birkhoff averages, exact circle Wasserstein-1 and dictionary gaps;
//! * [`stationary`] — stationary densities of the perturbed chain, computed
//!   both by a transfer-operator fixed point and by Monte Carlo time
//!   averages, with cross-validation;
//! * [`experiments`] — experiment configs, the noise-level sweep, Birkhoff
//!   scaling runs, and CSV/meta output shared with the `shadowlab` binary.
//!
//! All randomness flows through counter-based seeded streams, so every run
//! is bit-reproducible given `(config, master seed)`.

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod measures;
pub mod noise;
pub(crate) mod numerics;
pub mod phase_space;
pub mod shadowing;
pub mod stationary;

pub use error::{Error, Result};
pub use phase_space::{PhasePoint, Space};
