//! Coverage, capacity and total pathgain over the receiver region.

use thiserror::Error;

use crate::sitemap::{Coord, SiteMap};
use crate::twin::{AggregatePowerMap, RadioConfig, Twin, TwinError};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no placements to evaluate")]
    NoPlacements,
    #[error("noise variance must be positive, got {0}")]
    NoiseVariance(f64),
    #[error("power raster is {0:?} but the map is {1:?}")]
    Shape((usize, usize), (usize, usize)),
    #[error(transparent)]
    Twin(#[from] TwinError),
}

/// Network quality of a placement set. Coverage and capacity are
/// normalized by the receiver-region size; the raw sums are kept too.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NetworkMetrics {
    /// Fraction of receiver cells at or above the threshold.
    pub coverage: f64,
    /// Mean spectral efficiency, bits/s/Hz.
    pub capacity: f64,
    /// Total received power over the receiver region, watts.
    pub pathgain_w: f64,
    pub covered_cells: usize,
    pub r_cells: usize,
    /// Unnormalized capacity sum.
    pub capacity_sum: f64,
}

impl NetworkMetrics {
    /// `coverage,capacity,pathgain_w` with six significant digits.
    pub fn csv_fragment(&self) -> String {
        format!("{},{},{}", sig6(self.coverage), sig6(self.capacity), sig6(self.pathgain_w))
    }
}

/// Six significant digits in scientific notation, e.g. `5.94380e-1`.
pub fn sig6(v: f64) -> String {
    format!("{v:.5e}")
}

fn check_shape(agg: &AggregatePowerMap, map: &SiteMap) -> Result<(), MetricsError> {
    if (agg.width, agg.height) != (map.width(), map.height()) {
        return Err(MetricsError::Shape((agg.width, agg.height), (map.width(), map.height())));
    }
    Ok(())
}

fn receiver_powers<'a>(agg: &'a AggregatePowerMap, map: &'a SiteMap) -> impl Iterator<Item = f64> + 'a {
    agg.power.iter().zip(map.receiver()).filter(|(_, &r)| r).map(|(&p, _)| p)
}

pub fn covered_cells(agg: &AggregatePowerMap, radio: &RadioConfig, map: &SiteMap) -> Result<usize, MetricsError> {
    check_shape(agg, map)?;
    let thr = radio.threshold_w();
    Ok(receiver_powers(agg, map).filter(|&p| p >= thr).count())
}

/// Fraction of the receiver region with power `>= thr` (compared in watts).
pub fn coverage(agg: &AggregatePowerMap, radio: &RadioConfig, map: &SiteMap) -> Result<f64, MetricsError> {
    Ok(covered_cells(agg, radio, map)? as f64 / map.receiver_count() as f64)
}

fn capacity_sum(agg: &AggregatePowerMap, radio: &RadioConfig, map: &SiteMap) -> Result<f64, MetricsError> {
    check_shape(agg, map)?;
    let noise = radio.noise_variance_w;
    if !(noise > 0.0) {
        return Err(MetricsError::NoiseVariance(noise));
    }
    Ok(receiver_powers(agg, map).map(|p| (1.0 + p / noise).log2()).sum())
}

/// Mean of `log2(1 + P / sigma^2)` over the receiver region.
pub fn capacity(agg: &AggregatePowerMap, radio: &RadioConfig, map: &SiteMap) -> Result<f64, MetricsError> {
    Ok(capacity_sum(agg, radio, map)? / map.receiver_count() as f64)
}

pub fn pathgain_total(agg: &AggregatePowerMap, map: &SiteMap) -> Result<f64, MetricsError> {
    check_shape(agg, map)?;
    Ok(receiver_powers(agg, map).sum())
}

/// All three metrics from one aggregate.
pub fn from_aggregate(
    agg: &AggregatePowerMap,
    radio: &RadioConfig,
    map: &SiteMap,
) -> Result<NetworkMetrics, MetricsError> {
    let covered = covered_cells(agg, radio, map)?;
    let cap = capacity_sum(agg, radio, map)?;
    let r_cells = map.receiver_count();
    Ok(NetworkMetrics {
        coverage: covered as f64 / r_cells as f64,
        capacity: cap / r_cells as f64,
        pathgain_w: pathgain_total(agg, map)?,
        covered_cells: covered,
        r_cells,
        capacity_sum: cap,
    })
}

/// Evaluates a placement set through the twin's prediction cache.
pub fn evaluate(twin: &Twin, map: &SiteMap, placements: &[Coord]) -> Result<NetworkMetrics, MetricsError> {
    if placements.is_empty() {
        return Err(MetricsError::NoPlacements);
    }
    let agg = twin.aggregate(map, placements)?;
    from_aggregate(&agg, twin.radio(), map)
}
