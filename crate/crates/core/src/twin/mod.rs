//! Deterministic pathloss twin: free-space loss plus a capped per-wall
//! penalty, evaluated for every cell of a site map.

mod cache;
pub mod heatmap;
mod trace;

use std::borrow::Borrow;
use std::sync::Arc;

use thiserror::Error;

pub use cache::{CacheStats, LruCache};
pub use trace::{supercover, trace_walls};

use crate::rng::Fnv64;
use crate::sitemap::{Coord, SiteMap};

/// Received power never drops below this floor (watts).
pub const POWER_FLOOR_W: f64 = 1e-20;

#[derive(Debug, Error, PartialEq)]
pub enum TwinError {
    #[error("base station {0} is not in the deployable set")]
    NotDeployable(Coord),
    #[error("cannot aggregate an empty list of power maps")]
    EmptyAggregate,
    #[error("raster shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize), (usize, usize)),
    #[error("invalid radio configuration: {0}")]
    InvalidRadio(String),
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioConfig {
    pub carrier_freq_hz: f64,
    pub tx_power_dbm: f64,
    /// Coverage threshold `thr` in dBm.
    pub coverage_threshold_dbm: f64,
    /// Penalty per building cell crossed.
    pub wall_loss_db: f64,
    /// Upper bound on the total wall penalty.
    pub excess_loss_cap_db: f64,
    pub min_distance_m: f64,
    /// Noise variance in watts; `thr / 4` unless overridden, which puts the
    /// cell-edge SNR at 6 dB.
    pub noise_variance_w: f64,
    /// Recorded for reporting; noise is derived from `thr`, not from kTB.
    pub bandwidth_hz: f64,
}

impl RadioConfig {
    /// 2.5 GHz, 0 dBm, thr = -90.015 dBm, 10 dB per wall capped at 60 dB,
    /// minimum distance half a cell.
    pub fn for_cell_size(cell_size: f64) -> Self {
        let thr = -90.015;
        RadioConfig {
            carrier_freq_hz: 2.5e9,
            tx_power_dbm: 0.0,
            coverage_threshold_dbm: thr,
            wall_loss_db: 10.0,
            excess_loss_cap_db: 60.0,
            min_distance_m: cell_size / 2.0,
            noise_variance_w: dbm_to_watts(thr) / 4.0,
            bandwidth_hz: 1e6,
        }
    }

    /// Changes the threshold and re-derives the noise variance from it.
    pub fn with_threshold(mut self, thr_dbm: f64) -> Self {
        self.coverage_threshold_dbm = thr_dbm;
        self.noise_variance_w = dbm_to_watts(thr_dbm) / 4.0;
        self
    }

    pub fn with_noise_variance(mut self, watts: f64) -> Self {
        self.noise_variance_w = watts;
        self
    }

    pub fn validate(&self) -> Result<(), TwinError> {
        let bad = |m: &str| Err(TwinError::InvalidRadio(m.to_string()));
        if !(self.carrier_freq_hz > 0.0 && self.carrier_freq_hz.is_finite()) {
            return bad("carrier frequency must be positive");
        }
        if !(self.min_distance_m > 0.0 && self.min_distance_m.is_finite()) {
            return bad("min_distance must be positive");
        }
        if !(self.wall_loss_db >= 0.0) {
            return bad("wall_loss must be non-negative");
        }
        if !(self.excess_loss_cap_db >= 0.0) {
            return bad("excess_loss_cap must be non-negative");
        }
        if !(self.noise_variance_w > 0.0 && self.noise_variance_w.is_finite()) {
            return bad("noise variance must be positive");
        }
        if !self.tx_power_dbm.is_finite() || !self.coverage_threshold_dbm.is_finite() {
            return bad("power levels must be finite");
        }
        Ok(())
    }

    pub fn threshold_w(&self) -> f64 {
        dbm_to_watts(self.coverage_threshold_dbm)
    }

    /// `20 log10(f_MHz) + 32.44 - 60`: the free-space constant for
    /// distances in meters.
    pub fn fspl_constant_db(&self) -> f64 {
        20.0 * (self.carrier_freq_hz / 1e6).log10() + 32.44 - 60.0
    }

    /// Free-space loss at `distance_m`, clamped below at `min_distance_m`.
    pub fn free_space_loss_db(&self, distance_m: f64) -> f64 {
        20.0 * distance_m.max(self.min_distance_m).log10() + self.fspl_constant_db()
    }

    pub fn wall_penalty_db(&self, walls: usize) -> f64 {
        (self.wall_loss_db * walls as f64).min(self.excess_loss_cap_db)
    }

    /// Number of walls beyond which the penalty is saturated.
    fn wall_limit(&self) -> usize {
        if self.wall_loss_db <= 0.0 {
            0
        } else {
            let n = (self.excess_loss_cap_db / self.wall_loss_db).ceil();
            if n >= usize::MAX as f64 {
                usize::MAX
            } else {
                n as usize
            }
        }
    }

    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv64::default();
        for v in [
            self.carrier_freq_hz,
            self.tx_power_dbm,
            self.coverage_threshold_dbm,
            self.wall_loss_db,
            self.excess_loss_cap_db,
            self.min_distance_m,
            self.noise_variance_w,
        ] {
            h.write_f64(v);
        }
        h.finish()
    }
}

/// Received power (watts) at every cell from one transmitter.
#[derive(Debug, Clone, PartialEq)]
pub struct PathlossMap {
    pub width: usize,
    pub height: usize,
    pub source: Coord,
    pub power: Vec<f64>,
    pub map_id: u64,
}

/// Per-cell power summed over several transmitters.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatePowerMap {
    pub width: usize,
    pub height: usize,
    /// Contributing sources in canonical (sorted) order.
    pub sources: Vec<Coord>,
    pub power: Vec<f64>,
}

/// Predicts the received-power raster for a transmitter at `bs`.
///
/// Per cell, with `d` the center-to-center distance in meters:
///
/// ```text
/// PL = 20 log10(max(d, d_min)) + 20 log10(f_MHz) + 32.44 - 60 + min(wall_loss * walls, cap)
/// P  = max(10^((tx - PL - 30) / 10), 1e-20) W
/// ```
pub fn predict_pathloss(map: &SiteMap, radio: &RadioConfig, bs: Coord) -> Result<PathlossMap, TwinError> {
    if !map.is_deployable(bs) {
        return Err(TwinError::NotDeployable(bs));
    }
    let (w, h) = (map.width(), map.height());
    let limit = radio.wall_limit();
    let constant = radio.fspl_constant_db();
    let mut power = Vec::with_capacity(w * h);
    for i in 0..h {
        for j in 0..w {
            let c = Coord::new(i, j);
            let di = i as f64 - bs.i as f64;
            let dj = j as f64 - bs.j as f64;
            let d = (map.cell_size() * (di * di + dj * dj).sqrt()).max(radio.min_distance_m);
            let walls = trace::count_walls(map, bs, c, limit);
            let loss = 20.0 * d.log10() + constant + radio.wall_penalty_db(walls);
            power.push(dbm_to_watts(radio.tx_power_dbm - loss).max(POWER_FLOOR_W));
        }
    }
    let mut id = Fnv64::default();
    id.write_u64(map.map_id());
    id.write_u64(bs.i as u64);
    id.write_u64(bs.j as u64);
    id.write_u64(radio.fingerprint());
    Ok(PathlossMap { width: w, height: h, source: bs, power, map_id: id.finish() })
}

/// Sums maps cell by cell in canonical source order, so the result does not
/// depend on the order of `maps`.
pub fn aggregate<M: Borrow<PathlossMap>>(maps: &[M]) -> Result<AggregatePowerMap, TwinError> {
    let first = maps.first().ok_or(TwinError::EmptyAggregate)?.borrow();
    let shape = (first.width, first.height);
    let mut sorted: Vec<&PathlossMap> = maps.iter().map(|m| m.borrow()).collect();
    for m in &sorted {
        if (m.width, m.height) != shape {
            return Err(TwinError::ShapeMismatch(shape, (m.width, m.height)));
        }
    }
    sorted.sort_by_key(|m| m.source);
    let mut power = vec![0.0; shape.0 * shape.1];
    for m in &sorted {
        for (acc, p) in power.iter_mut().zip(&m.power) {
            *acc += p;
        }
    }
    Ok(AggregatePowerMap { width: shape.0, height: shape.1, sources: sorted.iter().map(|m| m.source).collect(), power })
}

/// Cache key: a site and a transmitter cell.
pub type TwinKey = (u64, Coord);

/// A radio configuration bound to a prediction cache.
pub struct Twin {
    radio: RadioConfig,
    cache: LruCache<TwinKey, PathlossMap>,
}

impl Twin {
    pub const DEFAULT_CAPACITY: usize = 4096;

    pub fn new(radio: RadioConfig) -> Result<Self, TwinError> {
        Twin::with_capacity(radio, Self::DEFAULT_CAPACITY)
    }

    pub fn with_capacity(radio: RadioConfig, capacity: usize) -> Result<Self, TwinError> {
        radio.validate()?;
        Ok(Twin { radio, cache: LruCache::new(capacity) })
    }

    pub fn radio(&self) -> &RadioConfig {
        &self.radio
    }

    pub fn cache(&self) -> &LruCache<TwinKey, PathlossMap> {
        &self.cache
    }

    /// Cached prediction; bit-identical to [`predict_pathloss`].
    pub fn pathloss(&self, map: &SiteMap, bs: Coord) -> Result<Arc<PathlossMap>, TwinError> {
        self.cache.get_or_insert_with((map.map_id(), bs), || predict_pathloss(map, &self.radio, bs))
    }

    pub fn aggregate(&self, map: &SiteMap, placements: &[Coord]) -> Result<AggregatePowerMap, TwinError> {
        let maps = placements.iter().map(|&p| self.pathloss(map, p)).collect::<Result<Vec<_>, _>>()?;
        aggregate(&maps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(a.abs())
    }

    #[test]
    fn fspl_spot_values() {
        let radio = RadioConfig::for_cell_size(4.0);
        let exact = 32.44 + 20.0 * 2500f64.log10() - 60.0;
        assert!(close(radio.fspl_constant_db(), exact, 1e-12));
        assert!(close(radio.free_space_loss_db(100.0), 40.0 + exact, 1e-12));
        assert!(close(radio.free_space_loss_db(0.0), 20.0 * 2f64.log10() + exact, 1e-12));
        assert_eq!(format!("{:.3}", radio.free_space_loss_db(100.0)), "80.399");
    }

    #[test]
    fn noise_is_quarter_threshold() {
        let radio = RadioConfig::for_cell_size(1.0);
        assert!(close(radio.noise_variance_w * 4.0, radio.threshold_w(), 1e-15));
        assert!(close(radio.threshold_w(), 9.965520801347683e-13, 1e-12));
    }

    #[test]
    fn power_at_100m() {
        // 25 x 1 map with 4 m cells: column 25 is 100 m from column 0
        let map = SiteMap::open(26, 1, 4.0).unwrap();
        let radio = RadioConfig::for_cell_size(4.0);
        let pl = predict_pathloss(&map, &radio, Coord::new(0, 0)).unwrap();
        let expected = 10f64.powf((-80.39880017344075 - 30.0) / 10.0);
        assert!(close(pl.power[25], expected, 1e-9), "{}", pl.power[25]);
        let self_dbm = watts_to_dbm(pl.power[0]);
        assert!(close(self_dbm, -46.41940008672037, 1e-9));
        assert!(pl.power.iter().all(|&p| p <= pl.power[0]));
    }

    #[test]
    fn wall_cap_binds() {
        let mut occ = vec![true; 12];
        occ[0] = false;
        occ[11] = false;
        let map = SiteMap::new(12, 1, 1.0, occ, None, None).unwrap();
        let radio = RadioConfig::for_cell_size(1.0);
        assert_eq!(trace_walls(&map, Coord::new(0, 0), Coord::new(0, 11)), 10);
        assert_eq!(radio.wall_penalty_db(10), 60.0);
        let pl = predict_pathloss(&map, &radio, Coord::new(0, 0)).unwrap();
        let free = radio.free_space_loss_db(11.0);
        assert!(close(pl.power[11], dbm_to_watts(-(free + 60.0)), 1e-12));
    }

    #[test]
    fn rejects_building_source() {
        let mut occ = vec![false; 4];
        occ[1] = true;
        let map = SiteMap::new(2, 2, 1.0, occ, None, None).unwrap();
        let radio = RadioConfig::for_cell_size(1.0);
        assert_eq!(predict_pathloss(&map, &radio, Coord::new(0, 1)), Err(TwinError::NotDeployable(Coord::new(0, 1))));
        assert_eq!(predict_pathloss(&map, &radio, Coord::new(5, 5)), Err(TwinError::NotDeployable(Coord::new(5, 5))));
    }

    #[test]
    fn floor_applies() {
        let map = SiteMap::open(3, 1, 1.0).unwrap();
        let radio = RadioConfig { tx_power_dbm: -300.0, ..RadioConfig::for_cell_size(1.0) };
        let pl = predict_pathloss(&map, &radio, Coord::new(0, 0)).unwrap();
        assert!(pl.power.iter().all(|&p| p == POWER_FLOOR_W));
    }

    #[test]
    fn aggregate_contract() {
        let map = SiteMap::open(6, 5, 3.0).unwrap();
        let radio = RadioConfig::for_cell_size(3.0);
        let a = predict_pathloss(&map, &radio, Coord::new(1, 1)).unwrap();
        let b = predict_pathloss(&map, &radio, Coord::new(4, 3)).unwrap();
        let single = aggregate(&[&a]).unwrap();
        assert_eq!(single.power, a.power);
        let doubled = aggregate(&[&a, &a]).unwrap();
        assert!(doubled.power.iter().zip(&a.power).all(|(d, p)| *d == 2.0 * p));
        let ab = aggregate(&[&a, &b]).unwrap();
        let ba = aggregate(&[&b, &a]).unwrap();
        assert_eq!(ab, ba);
        assert_eq!(ab.sources, vec![Coord::new(1, 1), Coord::new(4, 3)]);
        let empty: [&PathlossMap; 0] = [];
        assert_eq!(aggregate(&empty), Err(TwinError::EmptyAggregate));
        let other = predict_pathloss(&SiteMap::open(2, 2, 3.0).unwrap(), &radio, Coord::new(0, 0)).unwrap();
        assert!(matches!(aggregate(&[&a, &other]), Err(TwinError::ShapeMismatch(..))));
    }

    #[test]
    fn cached_equals_uncached() {
        let map = SiteMap::open(8, 8, 2.0).unwrap();
        let twin = Twin::new(RadioConfig::for_cell_size(2.0)).unwrap();
        let direct = predict_pathloss(&map, twin.radio(), Coord::new(2, 5)).unwrap();
        let first = twin.pathloss(&map, Coord::new(2, 5)).unwrap();
        let second = twin.pathloss(&map, Coord::new(2, 5)).unwrap();
        assert_eq!(*first, direct);
        assert!(Arc::ptr_eq(&first, &second));
        let stats = twin.cache().stats();
        assert_eq!((stats.hits, stats.misses), (1, 1));
    }

    #[test]
    fn radio_validation() {
        let ok = RadioConfig::for_cell_size(1.0);
        assert!(ok.validate().is_ok());
        assert!(RadioConfig { min_distance_m: 0.0, ..ok }.validate().is_err());
        assert!(RadioConfig { wall_loss_db: -1.0, ..ok }.validate().is_err());
        assert!(RadioConfig { excess_loss_cap_db: -1.0, ..ok }.validate().is_err());
        assert!(ok.with_noise_variance(0.0).validate().is_err());
        assert!(Twin::new(RadioConfig { min_distance_m: -1.0, ..ok }).is_err());
    }
}
