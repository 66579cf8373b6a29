//! Sequential placement episodes: reset, observe, step.

use std::sync::Arc;

use thiserror::Error;

use crate::metrics::{self, MetricsError, NetworkMetrics};
use crate::reward::{step_reward, RewardWeights};
use crate::sitemap::{Coord, SiteMap};
use crate::twin::{self, AggregatePowerMap, PathlossMap, Twin, TwinError};

/// Power-channel window in dBm.
pub const POWER_WINDOW_DBM: (f64, f64) = (-120.0, -40.0);

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("horizon {horizon} exceeds the {deployable} deployable cells")]
    HorizonTooLong { horizon: usize, deployable: usize },
    #[error("action {0} is not admissible")]
    Inadmissible(Coord),
    #[error("episode already finished")]
    Finished,
    #[error(transparent)]
    Twin(#[from] TwinError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Agent-facing view of an episode. Feature order (see [`Observation::write_features`])
/// is the occupancy channel row-major, then the power channel row-major,
/// then `t / T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub width: usize,
    pub height: usize,
    pub occupancy: Vec<f64>,
    pub power: Vec<f64>,
    pub mask: Vec<bool>,
    pub step_fraction: f64,
}

impl Observation {
    pub fn feature_len(width: usize, height: usize) -> usize {
        2 * width * height + 1
    }

    pub fn write_features(&self, out: &mut [f64]) {
        let n = self.width * self.height;
        assert_eq!(out.len(), 2 * n + 1);
        out[..n].copy_from_slice(&self.occupancy);
        out[n..2 * n].copy_from_slice(&self.power);
        out[2 * n] = self.step_fraction;
    }

    pub fn features(&self) -> Vec<f64> {
        let mut v = vec![0.0; Self::feature_len(self.width, self.height)];
        self.write_features(&mut v);
        v
    }

    pub fn admissible_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Power channel value of a received power in watts.
pub fn normalize_power(watts: f64) -> f64 {
    let (lo, hi) = POWER_WINDOW_DBM;
    ((twin::watts_to_dbm(watts) - lo) / (hi - lo)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub metrics: NetworkMetrics,
}

/// One row of an episode trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub action: Coord,
    pub reward: f64,
    pub metrics: NetworkMetrics,
}

/// Episode state, owned by a single caller and advanced only by `step`.
#[derive(Clone)]
pub struct Episode {
    map: Arc<SiteMap>,
    twin: Arc<Twin>,
    horizon: usize,
    placements: Vec<Coord>,
    sources: Vec<Arc<PathlossMap>>,
    agg: Option<AggregatePowerMap>,
    prev_metrics: Option<NetworkMetrics>,
    used: Vec<bool>,
    trace: Vec<TraceRow>,
}

impl Episode {
    pub fn reset(map: Arc<SiteMap>, twin: Arc<Twin>, horizon: usize) -> Result<(Episode, Observation), EnvError> {
        if horizon == 0 {
            return Err(EnvError::ZeroHorizon);
        }
        let deployable = map.deployable_count();
        if horizon > deployable {
            return Err(EnvError::HorizonTooLong { horizon, deployable });
        }
        let used = vec![false; map.cells()];
        let ep = Episode {
            map,
            twin,
            horizon,
            placements: Vec::with_capacity(horizon),
            sources: Vec::with_capacity(horizon),
            agg: None,
            prev_metrics: None,
            used,
            trace: Vec::new(),
        };
        let obs = ep.observe();
        Ok((ep, obs))
    }

    pub fn map(&self) -> &Arc<SiteMap> {
        &self.map
    }

    pub fn twin(&self) -> &Arc<Twin> {
        &self.twin
    }

    pub fn t(&self) -> usize {
        self.placements.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn is_done(&self) -> bool {
        self.t() == self.horizon
    }

    pub fn placements(&self) -> &[Coord] {
        &self.placements
    }

    pub fn aggregate(&self) -> Option<&AggregatePowerMap> {
        self.agg.as_ref()
    }

    pub fn metrics(&self) -> Option<&NetworkMetrics> {
        self.prev_metrics.as_ref()
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    pub fn is_admissible(&self, c: Coord) -> bool {
        self.map.is_deployable(c) && !self.used[self.map.index(c)]
    }

    pub fn mask(&self) -> Vec<bool> {
        self.map.deployable().iter().zip(&self.used).map(|(&d, &u)| d && !u).collect()
    }

    pub fn observe(&self) -> Observation {
        let n = self.map.cells();
        let occupancy = self.map.occupancy().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let power = match &self.agg {
            Some(agg) => agg.power.iter().map(|&p| normalize_power(p)).collect(),
            None => vec![0.0; n],
        };
        Observation {
            width: self.map.width(),
            height: self.map.height(),
            occupancy,
            power,
            mask: self.mask(),
            step_fraction: self.t() as f64 / self.horizon as f64,
        }
    }

    /// Places a base station at `action`. The aggregate is rebuilt from all
    /// placements in canonical order so that the metrics equal a fresh
    /// `evaluate` of the same set.
    pub fn step(&mut self, action: Coord, weights: &RewardWeights) -> Result<StepOutcome, EnvError> {
        if self.is_done() {
            return Err(EnvError::Finished);
        }
        if !self.is_admissible(action) {
            return Err(EnvError::Inadmissible(action));
        }
        let source = self.twin.pathloss(&self.map, action)?;
        self.sources.push(source);
        self.placements.push(action);
        let k = self.map.index(action);
        self.used[k] = true;
        let agg = twin::aggregate(&self.sources)?;
        let curr = metrics::from_aggregate(&agg, self.twin.radio(), &self.map)?;
        let reward = step_reward(self.prev_metrics.as_ref(), &curr, weights);
        self.agg = Some(agg);
        self.prev_metrics = Some(curr);
        self.trace.push(TraceRow { t: self.t(), action, reward, metrics: curr });
        Ok(StepOutcome { observation: self.observe(), reward, done: self.is_done(), metrics: curr })
    }

    /// Trace rows as CSV with header `t,i,j,reward,coverage,capacity`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("t,i,j,reward,coverage,capacity\n");
        for row in &self.trace {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                row.t,
                row.action.i,
                row.action.j,
                metrics::sig6(row.reward),
                metrics::sig6(row.metrics.coverage),
                metrics::sig6(row.metrics.capacity)
            ));
        }
        out
    }
}
