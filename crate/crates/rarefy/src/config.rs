//! TOML run configuration.
//!
//! Every subcommand reads the same file; sections a subcommand does not use
//! are ignored by it. Missing optional keys take the defaults below, and the
//! fully resolved configuration is written next to each run's outputs.

use std::path::{Path, PathBuf};

use rarefaction_core::measure::Measure;
use rarefaction_core::rarefaction::{CloudScheme, DEFAULT_MAX_PARTICLES};
use rarefaction_core::sde::DiffusionSpec;
use rarefaction_core::spectral::{DEFAULT_CERTIFICATE_CAP, MODE_CAPACITY};
use rarefaction_core::{Domain, Point};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

fn default_modes() -> usize {
    10
}

fn default_cap() -> f64 {
    DEFAULT_CERTIFICATE_CAP
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Number of eigenmodes `K` kept in the survival series.
    #[serde(default = "default_modes")]
    pub modes: usize,
    /// Largest accepted truncation bound; fixes `t_min`.
    #[serde(default = "default_cap")]
    pub certificate_cap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainConfig>,
    #[serde(default)]
    pub diffusion: DiffusionConfig,
    #[serde(default)]
    pub measure: MeasureConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roots: Option<RootsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub survival: Option<SurvivalConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum DomainConfig {
    Disk { radius: f64 },
    Rectangle { side_x: f64, side_y: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionConfig {
    #[serde(default = "one")]
    pub sigma_x: f64,
    #[serde(default = "one")]
    pub sigma_y: f64,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        Self {
            sigma_x: 1.0,
            sigma_y: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MeasureConfig {
    /// `density` times area on the whole domain.
    Lebesgue {
        #[serde(default = "one")]
        density: f64,
    },
    /// `density` times area on ring `index` of `rings` equal-width rings (disk only).
    Ring {
        rings: usize,
        index: usize,
        #[serde(default = "one")]
        density: f64,
    },
}

impl Default for MeasureConfig {
    fn default() -> Self {
        MeasureConfig::Lebesgue { density: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RootsConfig {
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurvivalConfig {
    pub times: Vec<f64>,
    /// Points per axis of a uniform grid over the bounding box, boundary
    /// included; points outside the domain are skipped.
    #[serde(default)]
    pub grid: usize,
    /// Extra evaluation points.
    #[serde(default)]
    pub points: Vec<Point>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub tau: f64,
    pub dt: f64,
    pub paths: u64,
    pub start: Point,
    #[serde(default = "yes")]
    pub bridge: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeConfig {
    Thinning,
    Sde,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeConfig {
    Grid,
    Stratified,
    Iid,
}

impl From<SchemeConfig> for CloudScheme {
    fn from(s: SchemeConfig) -> Self {
        match s {
            SchemeConfig::Grid => CloudScheme::Grid,
            SchemeConfig::Stratified => CloudScheme::Stratified,
            SchemeConfig::Iid => CloudScheme::Iid,
        }
    }
}

fn default_scheme() -> SchemeConfig {
    SchemeConfig::Grid
}

fn default_dt() -> f64 {
    1e-3
}

fn default_max_particles() -> u64 {
    DEFAULT_MAX_PARTICLES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub taus: Vec<f64>,
    pub mode: ModeConfig,
    pub trials: u64,
    #[serde(default = "default_scheme")]
    pub scheme: SchemeConfig,
    /// SDE mode only.
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// SDE mode only.
    #[serde(default = "yes")]
    pub bridge: bool,
    #[serde(default = "default_max_particles")]
    pub max_particles: u64,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(format!("{name} must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| bad(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always serializable")
    }

    /// Checks shared by every subcommand that needs a domain.
    pub fn validate_common(&self) -> Result<(), CliError> {
        if self.modes == 0 {
            return Err(bad("modes must be at least 1"));
        }
        if self.modes.saturating_mul(11) > MODE_CAPACITY {
            return Err(bad(format!(
                "modes must be at most {} (the certificate needs 10 K further modes)",
                MODE_CAPACITY / 11
            )));
        }
        positive("certificate_cap", self.certificate_cap)?;
        let domain = self.domain()?;
        let diffusion = self.diffusion()?;
        diffusion.check_domain(&domain).map_err(|e| bad(e.to_string()))?;
        self.measure()?.validate(&domain).map_err(|e| bad(e.to_string()))?;
        Ok(())
    }

    pub fn domain(&self) -> Result<Domain, CliError> {
        let d = self.domain.ok_or_else(|| bad("missing [domain] section"))?;
        match d {
            DomainConfig::Disk { radius } => {
                positive("domain.radius", radius)?;
                Domain::disk(radius)
            }
            DomainConfig::Rectangle { side_x, side_y } => {
                positive("domain.side_x", side_x)?;
                positive("domain.side_y", side_y)?;
                Domain::rectangle(side_x, side_y)
            }
        }
        .map_err(|e| bad(e.to_string()))
    }

    pub fn diffusion(&self) -> Result<DiffusionSpec, CliError> {
        positive("diffusion.sigma_x", self.diffusion.sigma_x)?;
        positive("diffusion.sigma_y", self.diffusion.sigma_y)?;
        DiffusionSpec::new(self.diffusion.sigma_x, self.diffusion.sigma_y)
            .map_err(|e| bad(e.to_string()))
    }

    pub fn measure(&self) -> Result<Measure, CliError> {
        let m = match self.measure {
            MeasureConfig::Lebesgue { density } => Measure::Lebesgue { density },
            MeasureConfig::Ring {
                rings,
                index,
                density,
            } => Measure::Ring {
                rings,
                index,
                density,
            },
        };
        if !(m.density() >= 0.0 && m.density().is_finite()) {
            return Err(bad("measure.density must be finite and non-negative"));
        }
        Ok(m)
    }

    pub fn roots_section(&self) -> Result<RootsConfig, CliError> {
        let r = self.roots.ok_or_else(|| bad("missing [roots] section"))?;
        if r.count == 0 {
            return Err(bad("roots.count must be at least 1"));
        }
        Ok(r)
    }

    pub fn survival_section(&self) -> Result<&SurvivalConfig, CliError> {
        self.validate_common()?;
        let s = self
            .survival
            .as_ref()
            .ok_or_else(|| bad("missing [survival] section"))?;
        if s.times.is_empty() {
            return Err(bad("survival.times must not be empty"));
        }
        for &t in &s.times {
            positive("survival.times entry", t)?;
        }
        if s.grid == 1 {
            return Err(bad("survival.grid must be 0 or at least 2"));
        }
        if s.grid == 0 && s.points.is_empty() {
            return Err(bad("survival needs grid >= 2 or a non-empty points list"));
        }
        if s.points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(bad("survival.points must be finite"));
        }
        Ok(s)
    }

    pub fn simulate_section(&self) -> Result<SimulateConfig, CliError> {
        self.validate_common()?;
        let s = self.simulate.ok_or_else(|| bad("missing [simulate] section"))?;
        positive("simulate.tau", s.tau)?;
        positive("simulate.dt", s.dt)?;
        if s.dt > s.tau {
            return Err(bad("simulate.dt must not exceed simulate.tau"));
        }
        if s.paths == 0 {
            return Err(bad("simulate.paths must be at least 1"));
        }
        if s.paths > 1 << 32 {
            return Err(bad("simulate.paths must be at most 2^32"));
        }
        if self.domain()?.signed_distance(s.start) < 0.0 {
            return Err(bad(format!(
                "simulate.start {:?} lies outside the domain",
                s.start
            )));
        }
        Ok(s)
    }

    pub fn experiment_section(&self) -> Result<&ExperimentConfig, CliError> {
        self.validate_common()?;
        let e = self
            .experiment
            .as_ref()
            .ok_or_else(|| bad("missing [experiment] section"))?;
        if e.taus.is_empty() {
            return Err(bad("experiment.taus must not be empty"));
        }
        for &t in &e.taus {
            positive("experiment.taus entry", t)?;
        }
        if e.trials == 0 {
            return Err(bad("experiment.trials must be at least 1"));
        }
        if e.trials > 1 << 32 {
            return Err(bad("experiment.trials must be at most 2^32"));
        }
        if e.mode == ModeConfig::Sde {
            positive("experiment.dt", e.dt)?;
            if let Some(&t) = e.taus.iter().find(|&&t| t < e.dt) {
                return Err(bad(format!("experiment.dt exceeds tau = {t}")));
            }
        }
        Ok(e)
    }
}
