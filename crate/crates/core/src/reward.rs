//! Step rewards: weighted marginal gains in coverage, capacity and
//! normalized pathgain.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::metrics::{self, MetricsError, NetworkMetrics};
use crate::rng;
use crate::sitemap::SiteMap;
use crate::twin::Twin;

#[derive(Debug, Error, PartialEq)]
pub enum RewardError {
    #[error("unknown reward preset {0:?}")]
    UnknownPreset(String),
    #[error("calibration needs at least 10 samples, got {0}")]
    TooFewSamples(usize),
    #[error("calibration needs at least one map")]
    NoMaps,
    #[error("invalid reward weights: {0}")]
    Invalid(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Preset {
    CoverageOnly,
    CapacityOnly,
    CoverageCapacity,
    PathgainCapacity,
    #[default]
    PathgainCoverage,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::CapacityOnly,
        Preset::CoverageCapacity,
        Preset::PathgainCapacity,
        Preset::CoverageOnly,
        Preset::PathgainCoverage,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::CoverageOnly => "coverage_only",
            Preset::CapacityOnly => "capacity_only",
            Preset::CoverageCapacity => "coverage_capacity",
            Preset::PathgainCapacity => "pathgain_capacity",
            Preset::PathgainCoverage => "pathgain_coverage",
        }
    }

    /// Human-readable row label for ablation reports.
    pub fn label(self) -> &'static str {
        match self {
            Preset::CoverageOnly => "Coverage Only",
            Preset::CapacityOnly => "Capacity Only",
            Preset::CoverageCapacity => "Coverage + Capacity",
            Preset::PathgainCapacity => "Pathgain + Capacity",
            Preset::PathgainCoverage => "Pathgain + Coverage",
        }
    }

    /// `(nu1, nu2, nu3)` for coverage, capacity and pathgain.
    pub fn weights(self) -> (f64, f64, f64) {
        match self {
            Preset::CoverageOnly => (1.0, 0.0, 0.0),
            Preset::CapacityOnly => (0.0, 1.0, 0.0),
            Preset::CoverageCapacity => (1.0, 1.0, 0.0),
            Preset::PathgainCapacity => (0.0, 1.0, 1.0),
            Preset::PathgainCoverage => (1.0, 0.0, 1.0),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = RewardError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL.into_iter().find(|p| p.as_str() == s).ok_or_else(|| RewardError::UnknownPreset(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardWeights {
    pub nu1: f64,
    pub nu2: f64,
    pub nu3: f64,
    /// Multiplies pathgain (watts) before weighting.
    pub pathgain_scale: f64,
    pub preset_name: String,
}

impl RewardWeights {
    pub fn new(nu1: f64, nu2: f64, nu3: f64, pathgain_scale: f64, name: &str) -> Result<Self, RewardError> {
        let w = RewardWeights { nu1, nu2, nu3, pathgain_scale, preset_name: name.to_string() };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), RewardError> {
        let ws = [self.nu1, self.nu2, self.nu3];
        if ws.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(RewardError::Invalid("weights must be finite and non-negative".into()));
        }
        if !ws.iter().any(|&w| w > 0.0) {
            return Err(RewardError::Invalid("at least one weight must be positive".into()));
        }
        if !(self.pathgain_scale > 0.0 && self.pathgain_scale.is_finite()) {
            return Err(RewardError::Invalid("pathgain_scale must be positive".into()));
        }
        Ok(())
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.pathgain_scale = scale;
        self
    }
}

/// Weight vector of a named preset, with `pathgain_scale = 1` pending
/// calibration.
pub fn preset(p: Preset) -> RewardWeights {
    let (nu1, nu2, nu3) = p.weights();
    RewardWeights { nu1, nu2, nu3, pathgain_scale: 1.0, preset_name: p.as_str().to_string() }
}

/// `1 / mean pathgain` of a single uniformly random deployable cell on a
/// uniformly random map, over `n_samples` draws.
pub fn calibrate_pathgain_scale(
    maps: &[SiteMap],
    twin: &Twin,
    n_samples: usize,
    seed: u64,
) -> Result<f64, RewardError> {
    if maps.is_empty() {
        return Err(RewardError::NoMaps);
    }
    if n_samples < 10 {
        return Err(RewardError::TooFewSamples(n_samples));
    }
    let mut stream = rng::seeded(seed);
    let mut total = 0.0;
    for _ in 0..n_samples {
        let map = &maps[rng::below(&mut stream, maps.len() as u64) as usize];
        let cells = map.deployable_cells();
        let bs = cells[rng::below(&mut stream, cells.len() as u64) as usize];
        total += metrics::evaluate(twin, map, &[bs])?.pathgain_w;
    }
    Ok(n_samples as f64 / total)
}

/// Marginal reward of the latest placement: weighted change in each metric
/// relative to the set before it (absolute values on the first step).
pub fn step_reward(prev: Option<&NetworkMetrics>, curr: &NetworkMetrics, w: &RewardWeights) -> f64 {
    let (v0, c0, p0) = prev.map_or((0.0, 0.0, 0.0), |m| (m.coverage, m.capacity, m.pathgain_w));
    w.nu1 * (curr.coverage - v0) + w.nu2 * (curr.capacity - c0) + w.nu3 * w.pathgain_scale * (curr.pathgain_w - p0)
}
