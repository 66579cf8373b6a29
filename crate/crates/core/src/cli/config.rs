//! Line-oriented experiment configuration.
//!
//! ```text
//! # comment
//! key = value
//! ```
//!
//! Blank lines and `#` comments are ignored, unknown keys and malformed
//! values are errors reported with their line number.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::agent::ppo::{PpoConfig, CONFIG_KEYS as PPO_KEYS};
use crate::baselines::Metric;
use crate::reward::{preset, Preset, RewardWeights};
use crate::sitemap::SynthParams;
use crate::twin::{dbm_to_watts, RadioConfig};

#[derive(Debug, Error, PartialEq)]
#[error("{source_name}:{line}: {message}")]
pub struct ConfigError {
    pub source_name: String,
    pub line: usize,
    pub message: String,
}

impl ConfigError {
    pub fn general(message: impl Into<String>) -> Self {
        ConfigError { source_name: "config".into(), line: 0, message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    // corpus
    pub width: usize,
    pub height: usize,
    pub cell_size: f64,
    pub density: f64,
    pub building_min: usize,
    pub building_max: usize,
    pub train_maps: usize,
    pub test_maps: usize,
    pub train_seed_start: u64,
    pub test_seed_start: u64,
    pub train_map_files: Vec<PathBuf>,
    pub test_map_files: Vec<PathBuf>,
    // radio; `None` means derived from the cell size or threshold
    pub carrier_freq_hz: f64,
    pub tx_power_dbm: f64,
    pub threshold_dbm: f64,
    pub wall_loss_db: f64,
    pub excess_loss_cap_db: f64,
    pub min_distance_m: Option<f64>,
    pub noise_variance_w: Option<f64>,
    pub bandwidth_hz: f64,
    pub cache_capacity: usize,
    // reward
    pub preset: Preset,
    /// `None` calibrates from the training split.
    pub pathgain_scale: Option<f64>,
    pub calibration_samples: usize,
    // agent
    pub ppo: PpoConfig,
    pub hidden_layers: Vec<usize>,
    pub horizon: usize,
    // baselines and bench
    pub budget: usize,
    pub metric: Metric,
    pub n_bs: Vec<usize>,
    pub schemes: Vec<String>,
    pub checkpoint: Option<PathBuf>,
    pub bench_repeats: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            width: 64,
            height: 64,
            cell_size: 8.0,
            density: 0.3,
            building_min: 4,
            building_max: 12,
            train_maps: 1100,
            test_maps: 50,
            train_seed_start: 1_000_000,
            test_seed_start: 0,
            train_map_files: Vec::new(),
            test_map_files: Vec::new(),
            carrier_freq_hz: 2.5e9,
            tx_power_dbm: 0.0,
            threshold_dbm: -90.015,
            wall_loss_db: 10.0,
            excess_loss_cap_db: 60.0,
            min_distance_m: None,
            noise_variance_w: None,
            bandwidth_hz: 1e6,
            cache_capacity: 4096,
            preset: Preset::default(),
            pathgain_scale: None,
            calibration_samples: 200,
            ppo: PpoConfig::default(),
            hidden_layers: vec![128; 4],
            horizon: 1,
            budget: 50,
            metric: Metric::Coverage,
            n_bs: vec![1],
            schemes: ["heuristic", "autobs", "exhaustive_v", "exhaustive_c"].map(String::from).to_vec(),
            checkpoint: None,
            bench_repeats: 1,
        }
    }
}

pub const SCHEMES: [&str; 5] = ["heuristic", "autobs", "exhaustive_v", "exhaustive_c", "greedy"];

fn parse<T: FromStr>(v: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("invalid value {v:?}: {e}"))
}

fn list<T: FromStr>(v: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(parse).collect()
}

/// `auto` (or empty) maps to `None`.
fn optional(v: &str) -> Result<Option<f64>, String> {
    if v.is_empty() || v == "auto" {
        Ok(None)
    } else {
        parse(v).map(Some)
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str, source_name: &str) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        for (k, raw) in text.lines().enumerate() {
            let err = |message: String| ConfigError { source_name: source_name.to_string(), line: k + 1, message };
            let line = raw.split_once('#').map_or(raw, |(before, _)| before).trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
            cfg.set(key.trim(), value.trim()).map_err(err)?;
        }
        cfg.validate().map_err(|message| ConfigError { source_name: source_name.to_string(), line: 0, message })?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        match key {
            "width" => self.width = parse(v)?,
            "height" => self.height = parse(v)?,
            "cell_size" => self.cell_size = parse(v)?,
            "density" => self.density = parse(v)?,
            "building_min" => self.building_min = parse(v)?,
            "building_max" => self.building_max = parse(v)?,
            "train_maps" => self.train_maps = parse(v)?,
            "test_maps" => self.test_maps = parse(v)?,
            "train_seed_start" => self.train_seed_start = parse(v)?,
            "test_seed_start" => self.test_seed_start = parse(v)?,
            "train_map_files" => self.train_map_files = list(v)?,
            "test_map_files" => self.test_map_files = list(v)?,
            "carrier_freq_hz" => self.carrier_freq_hz = parse(v)?,
            "tx_power_dbm" => self.tx_power_dbm = parse(v)?,
            "threshold_dbm" => self.threshold_dbm = parse(v)?,
            "wall_loss_db" => self.wall_loss_db = parse(v)?,
            "excess_loss_cap_db" => self.excess_loss_cap_db = parse(v)?,
            "min_distance_m" => self.min_distance_m = optional(v)?,
            "noise_variance_w" => self.noise_variance_w = optional(v)?,
            "bandwidth_hz" => self.bandwidth_hz = parse(v)?,
            "cache_capacity" => self.cache_capacity = parse(v)?,
            "preset" => self.preset = v.parse().map_err(|e| format!("{e}"))?,
            "pathgain_scale" => self.pathgain_scale = optional(v)?,
            "calibration_samples" => self.calibration_samples = parse(v)?,
            "hidden_layers" => self.hidden_layers = list(v)?,
            "horizon" => self.horizon = parse(v)?,
            "budget" => self.budget = parse(v)?,
            "metric" => self.metric = parse(v)?,
            "n_bs" => self.n_bs = list(v)?,
            "schemes" => self.schemes = list(v)?,
            "checkpoint" => self.checkpoint = if v.is_empty() { None } else { Some(PathBuf::from(v)) },
            "bench_repeats" => self.bench_repeats = parse(v)?,
            k if PPO_KEYS.contains(&k) => self.ppo.set(k, v)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.width == 0 || self.height == 0 {
            return Err("width and height must be positive".into());
        }
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return Err("cell_size must be positive".into());
        }
        if self.building_min == 0 || self.building_min > self.building_max {
            return Err("need 1 <= building_min <= building_max".into());
        }
        if let Some(s) = self.schemes.iter().find(|s| !SCHEMES.contains(&s.as_str())) {
            return Err(format!("unknown scheme {s:?}, expected one of {}", SCHEMES.join(", ")));
        }
        if self.n_bs.contains(&0) {
            return Err("n_bs entries must be at least 1".into());
        }
        if self.budget == 0 {
            return Err("budget must be at least 1".into());
        }
        if self.horizon == 0 {
            return Err("horizon must be at least 1".into());
        }
        if self.hidden_layers.is_empty() || self.hidden_layers.contains(&0) {
            return Err("hidden_layers must list positive widths".into());
        }
        if self.bench_repeats == 0 {
            return Err("bench_repeats must be at least 1".into());
        }
        self.radio().validate().map_err(|e| e.to_string())?;
        self.ppo.validate().map_err(|e| e.to_string())?;
        Ok(())
    }

    pub fn radio(&self) -> RadioConfig {
        RadioConfig {
            carrier_freq_hz: self.carrier_freq_hz,
            tx_power_dbm: self.tx_power_dbm,
            coverage_threshold_dbm: self.threshold_dbm,
            wall_loss_db: self.wall_loss_db,
            excess_loss_cap_db: self.excess_loss_cap_db,
            min_distance_m: self.min_distance_m.unwrap_or(self.cell_size / 2.0),
            noise_variance_w: self.noise_variance_w.unwrap_or(dbm_to_watts(self.threshold_dbm) / 4.0),
            bandwidth_hz: self.bandwidth_hz,
        }
    }

    pub fn synth_params(&self) -> SynthParams {
        SynthParams {
            width: self.width,
            height: self.height,
            cell_size: self.cell_size,
            building_density: self.density,
            building_size: (self.building_min, self.building_max),
        }
    }

    /// Preset weights with the configured scale, or scale 1 pending
    /// calibration.
    pub fn weights(&self) -> RewardWeights {
        preset(self.preset).with_scale(self.pathgain_scale.unwrap_or(1.0))
    }
}
