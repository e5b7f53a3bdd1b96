//! Declarative experiment configuration.
//!
//! A run is described by one TOML file with nested sections; the exact
//! grammar is documented in the repository README. Every run is addressed
//! by `(config, master seed)` and reproduces byte-identically.

use crate::dynamics::MapSpec;
use crate::error::{Error, Result};
use crate::measures::{standard_dictionary, Observable};
use crate::noise::{KernelShape, NoiseKernel};
use crate::phase_space::Space;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    map: RawMap,
    noise: RawNoise,
    orbit: RawOrbit,
    #[serde(default)]
    ulam: RawUlam,
    #[serde(default)]
    dictionary: RawDictionary,
    run: RawRun,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMap {
    family: String,
    k: Option<u32>,
    a: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    #[serde(default = "default_shape")]
    shape: String,
    epsilons: Vec<f64>,
}

fn default_shape() -> String {
    "uniform-ball".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOrbit {
    length: usize,
    burn_in: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUlam {
    cells: Option<usize>,
    quadrature: Option<usize>,
    reference_quadrature: Option<usize>,
    tolerance: Option<f64>,
    max_iterations: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDictionary {
    max_frequency: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    seed: u64,
    replicas: Option<usize>,
    out: Option<PathBuf>,
}

/// Validated experiment configuration.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub map: MapSpec,
    pub shape: KernelShape,
    /// Noise radii, strictly descending.
    pub epsilons: Vec<f64>,
    /// Chain/orbit length `n`.
    pub orbit_len: usize,
    pub burn_in: usize,
    pub ulam_cells: usize,
    pub quadrature: usize,
    /// Quadrature order for the zero-noise reference density. Point
    /// sampling of cell indicators carries an O(1/q) bias, so the
    /// reference wants far more points than the smooth-kernel builds.
    pub reference_quadrature: usize,
    pub power_tol: f64,
    pub power_max_iter: usize,
    pub dict_max_freq: u32,
    pub master_seed: u64,
    pub replicas: usize,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("parse error: {e}")))?;
        Self::validate(raw)
    }

    /// Read a config file; returns the config together with the SHA-256 of
    /// the file bytes (recorded in the output sidecar).
    pub fn load(path: &Path) -> Result<(Self, String)> {
        let bytes = std::fs::read(path)?;
        let text = String::from_utf8(bytes.clone())
            .map_err(|_| Error::Config(format!("{} is not UTF-8", path.display())))?;
        let config = Self::from_toml_str(&text)?;
        let hash = format!("{:x}", Sha256::digest(&bytes));
        Ok((config, hash))
    }

    fn validate(raw: RawConfig) -> Result<Self> {
        let map = match raw.map.family.as_str() {
            "linear-expanding" => MapSpec::linear_expanding(raw.map.k.unwrap_or(2))?,
            "nonlinear-expanding" => {
                let a = raw.map.a.ok_or_else(|| {
                    Error::Config("nonlinear-expanding needs the parameter 'a'".into())
                })?;
                MapSpec::nonlinear_expanding(a)?
            }
            "cat-map" => MapSpec::cat_map(),
            other => {
                return Err(Error::Config(format!(
                    "unknown map family '{other}' (expected linear-expanding, \
                     nonlinear-expanding, or cat-map)"
                )))
            }
        };
        let shape = KernelShape::parse(&raw.noise.shape)?;

        let epsilons = raw.noise.epsilons;
        if epsilons.is_empty() {
            return Err(Error::Config("noise.epsilons must be nonempty".into()));
        }
        if epsilons.iter().any(|e| !e.is_finite() || *e <= 0.0) {
            return Err(Error::Config("noise radii must be positive".into()));
        }
        if epsilons.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::Config(
                "noise.epsilons must be strictly descending".into(),
            ));
        }
        // Constructibility of every kernel.
        for &e in &epsilons {
            NoiseKernel::new(shape, e)?;
        }

        if raw.orbit.length < 1_000 {
            return Err(Error::Config(format!(
                "orbit.length must be at least 1000, got {}",
                raw.orbit.length
            )));
        }

        let ulam_cells = raw.ulam.cells.unwrap_or(1024);
        if ulam_cells < 16 {
            return Err(Error::Config(format!(
                "ulam.cells must be at least 16, got {ulam_cells}"
            )));
        }
        let quadrature = raw.ulam.quadrature.unwrap_or(4);
        let reference_quadrature = raw.ulam.reference_quadrature.unwrap_or(4096);
        if quadrature < 1 || reference_quadrature < 1 {
            return Err(Error::Config("quadrature orders must be at least 1".into()));
        }
        let power_tol = raw.ulam.tolerance.unwrap_or(1e-12);
        if !(power_tol > 0.0) {
            return Err(Error::Config("ulam.tolerance must be positive".into()));
        }
        let replicas = raw.run.replicas.unwrap_or(1);
        if replicas < 1 {
            return Err(Error::Config("run.replicas must be at least 1".into()));
        }

        let dict_max_freq = raw.dictionary.max_frequency.unwrap_or(match map.space() {
            Space::Circle => 8,
            Space::Torus => 4,
        });
        if dict_max_freq < 1 {
            return Err(Error::Config("dictionary.max_frequency must be >= 1".into()));
        }

        Ok(ExperimentConfig {
            map,
            shape,
            epsilons,
            orbit_len: raw.orbit.length,
            burn_in: raw.orbit.burn_in.unwrap_or(1_000),
            ulam_cells,
            quadrature,
            reference_quadrature,
            power_tol,
            power_max_iter: raw.ulam.max_iterations.unwrap_or(100_000),
            dict_max_freq,
            master_seed: raw.run.seed,
            replicas,
            out_dir: raw.run.out.unwrap_or_else(|| PathBuf::from("results")),
        })
    }

    /// Kernel at one of the configured shapes/radii.
    pub fn kernel(&self, epsilon: f64) -> Result<NoiseKernel> {
        NoiseKernel::new(self.shape, epsilon)
    }

    /// The configured observable dictionary.
    pub fn dictionary(&self) -> Vec<Observable> {
        standard_dictionary(self.map.space(), self.dict_max_freq)
    }
}
