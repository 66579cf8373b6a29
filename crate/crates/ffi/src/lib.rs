//! C ABI over `bsplace`.
//!
//! Objects cross the boundary as opaque handles (`BsSiteMap`, `BsTwin`,
//! `BsPolicy`) created by `*_new`/`*_load`/`*_generate` functions and
//! released with the matching `*_free`. Every fallible call returns a
//! `BsStatus`; on failure a message is kept per thread and can be copied
//! out with [`bs_last_error`]. Panics never unwind into the caller: they are
//! caught and reported as `BS_STATUS_PANIC`.
//!
//! Coordinates are passed as flat `(i, j)` pairs of `uint32_t`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;
use std::sync::Arc;

use bsplace::agent::checkpoint::load_checkpoint;
use bsplace::agent::train::evaluate_policy;
use bsplace::agent::PolicyParams;
use bsplace::baselines::{self, Metric};
use bsplace::sitemap::{self, SynthParams};
use bsplace::{metrics, rng, Coord, NetworkMetrics, RadioConfig, SiteMap, Twin};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BsStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// An argument was out of range or inconsistent.
    InvalidArgument = 2,
    /// File could not be read.
    Io = 3,
    /// Malformed map raster or checkpoint.
    Parse = 4,
    /// A placement is outside the deployable set.
    NotDeployable = 5,
    /// Output buffer too small; the message names the required size.
    BufferTooSmall = 6,
    Panic = 7,
}

/// Metric selector for searches.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BsMetric {
    Coverage = 0,
    Capacity = 1,
}

/// Mirrors the library's radio parameters.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BsRadioConfig {
    pub carrier_freq_hz: f64,
    pub tx_power_dbm: f64,
    pub coverage_threshold_dbm: f64,
    pub wall_loss_db: f64,
    pub excess_loss_cap_db: f64,
    pub min_distance_m: f64,
    pub noise_variance_w: f64,
    pub bandwidth_hz: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BsMetrics {
    pub coverage: f64,
    pub capacity: f64,
    pub pathgain_w: f64,
    pub covered_cells: u64,
    pub r_cells: u64,
}

/// Opaque site map.
pub struct BsSiteMap(Arc<SiteMap>);
/// Opaque pathloss twin with its prediction cache.
pub struct BsTwin(Arc<Twin>);
/// Opaque trained policy.
pub struct BsPolicy(PolicyParams);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

struct Failure(BsStatus, String);

impl Failure {
    fn new(status: BsStatus, msg: impl ToString) -> Self {
        Failure(status, msg.to_string())
    }
}

impl From<bsplace::twin::TwinError> for Failure {
    fn from(e: bsplace::twin::TwinError) -> Self {
        use bsplace::twin::TwinError;
        let status = match e {
            TwinError::NotDeployable(_) => BsStatus::NotDeployable,
            _ => BsStatus::InvalidArgument,
        };
        Failure::new(status, e)
    }
}

impl From<metrics::MetricsError> for Failure {
    fn from(e: metrics::MetricsError) -> Self {
        match e {
            metrics::MetricsError::Twin(t) => t.into(),
            other => Failure::new(BsStatus::InvalidArgument, other),
        }
    }
}

impl From<baselines::BaselineError> for Failure {
    fn from(e: baselines::BaselineError) -> Self {
        match e {
            baselines::BaselineError::Metrics(m) => m.into(),
            other => Failure::new(BsStatus::InvalidArgument, other),
        }
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BsStatus {
    let (status, msg) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => (BsStatus::Ok, String::new()),
        Ok(Err(Failure(s, m))) => (s, m),
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            (BsStatus::Panic, msg)
        }
    };
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
    status
}

unsafe fn as_ref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::new(BsStatus::NullArgument, format!("{name} is null")))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::new(BsStatus::NullArgument, format!("{name} is null")))
}

unsafe fn coords(ptr: *const u32, n: usize) -> Result<Vec<Coord>, Failure> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let flat = slice::from_raw_parts(as_ref(ptr, "coords")?, 2 * n);
    Ok(flat.chunks(2).map(|p| Coord::new(p[0] as usize, p[1] as usize)).collect())
}

unsafe fn write_coords(dst: *mut u32, cap: usize, cells: &[Coord]) -> Result<(), Failure> {
    if cap < cells.len() {
        return Err(Failure::new(BsStatus::BufferTooSmall, format!("need room for {} coordinates", cells.len())));
    }
    let flat = slice::from_raw_parts_mut(out(dst, "out_coords")?, 2 * cells.len());
    for (k, c) in cells.iter().enumerate() {
        flat[2 * k] = c.i as u32;
        flat[2 * k + 1] = c.j as u32;
    }
    Ok(())
}

fn to_c(m: &NetworkMetrics) -> BsMetrics {
    BsMetrics {
        coverage: m.coverage,
        capacity: m.capacity,
        pathgain_w: m.pathgain_w,
        covered_cells: m.covered_cells as u64,
        r_cells: m.r_cells as u64,
    }
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Copies the calling thread's last error message, NUL-terminated and
/// truncated to `cap` bytes, into `buf`. Returns the full message length
/// excluding the terminator; `buf` may be null to query the length.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn bs_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default radio parameters for a given cell size in meters.
#[no_mangle]
pub extern "C" fn bs_radio_default(cell_size_m: f64) -> BsRadioConfig {
    let r = RadioConfig::for_cell_size(cell_size_m);
    BsRadioConfig {
        carrier_freq_hz: r.carrier_freq_hz,
        tx_power_dbm: r.tx_power_dbm,
        coverage_threshold_dbm: r.coverage_threshold_dbm,
        wall_loss_db: r.wall_loss_db,
        excess_loss_cap_db: r.excess_loss_cap_db,
        min_distance_m: r.min_distance_m,
        noise_variance_w: r.noise_variance_w,
        bandwidth_hz: r.bandwidth_hz,
    }
}

/// Synthetic city-block map.
///
/// # Safety
/// `out_map` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bs_sitemap_generate(
    seed: u64,
    width: u32,
    height: u32,
    cell_size_m: f64,
    density: f64,
    building_min: u32,
    building_max: u32,
    out_map: *mut *mut BsSiteMap,
) -> BsStatus {
    guard(|| {
        let slot = out(out_map, "out_map")?;
        let params = SynthParams {
            width: width as usize,
            height: height as usize,
            cell_size: cell_size_m,
            building_density: density,
            building_size: (building_min as usize, building_max as usize),
        };
        let map = sitemap::generate_synthetic(seed, &params).map_err(|e| Failure::new(BsStatus::InvalidArgument, e))?;
        *slot = boxed(BsSiteMap(Arc::new(map)));
        Ok(())
    })
}

/// Map from an in-memory binary PGM raster (pixels >= 128 are buildings).
/// The deployable and receiver masks may be null for the defaults.
///
/// # Safety
/// Each non-null buffer must hold its stated number of bytes.
#[no_mangle]
pub unsafe extern "C" fn bs_sitemap_load_pgm(
    raster: *const u8,
    raster_len: usize,
    cell_size_m: f64,
    deployable: *const u8,
    deployable_len: usize,
    receiver: *const u8,
    receiver_len: usize,
    out_map: *mut *mut BsSiteMap,
) -> BsStatus {
    guard(|| {
        let slot = out(out_map, "out_map")?;
        let raster = slice::from_raw_parts(as_ref(raster, "raster")?, raster_len);
        let opt = |p: *const u8, n| (!p.is_null()).then(|| slice::from_raw_parts(p, n));
        let map =
            sitemap::load_sitemap(raster, cell_size_m, opt(deployable, deployable_len), opt(receiver, receiver_len))
                .map_err(|e| Failure::new(BsStatus::Parse, e))?;
        *slot = boxed(BsSiteMap(Arc::new(map)));
        Ok(())
    })
}

/// # Safety
/// `map` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bs_sitemap_free(map: *mut BsSiteMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Width, height and content hash. Any output pointer may be null.
///
/// # Safety
/// `map` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bs_sitemap_info(
    map: *const BsSiteMap,
    width: *mut u32,
    height: *mut u32,
    map_id: *mut u64,
) -> BsStatus {
    guard(|| {
        let m = &as_ref(map, "map")?.0;
        if let Some(w) = width.as_mut() {
            *w = m.width() as u32;
        }
        if let Some(h) = height.as_mut() {
            *h = m.height() as u32;
        }
        if let Some(id) = map_id.as_mut() {
            *id = m.map_id();
        }
        Ok(())
    })
}

/// Twin with the given radio parameters (null for the defaults of
/// `cell_size_m`).
///
/// # Safety
/// `radio` must be null or valid; `out_twin` must be valid.
#[no_mangle]
pub unsafe extern "C" fn bs_twin_new(
    radio: *const BsRadioConfig,
    cell_size_m: f64,
    out_twin: *mut *mut BsTwin,
) -> BsStatus {
    guard(|| {
        let slot = out(out_twin, "out_twin")?;
        let cfg = match radio.as_ref() {
            None => RadioConfig::for_cell_size(cell_size_m),
            Some(r) => RadioConfig {
                carrier_freq_hz: r.carrier_freq_hz,
                tx_power_dbm: r.tx_power_dbm,
                coverage_threshold_dbm: r.coverage_threshold_dbm,
                wall_loss_db: r.wall_loss_db,
                excess_loss_cap_db: r.excess_loss_cap_db,
                min_distance_m: r.min_distance_m,
                noise_variance_w: r.noise_variance_w,
                bandwidth_hz: r.bandwidth_hz,
            },
        };
        *slot = boxed(BsTwin(Arc::new(Twin::new(cfg)?)));
        Ok(())
    })
}

/// # Safety
/// `twin` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bs_twin_free(twin: *mut BsTwin) {
    if !twin.is_null() {
        drop(Box::from_raw(twin));
    }
}

/// Received power in watts at every cell (row-major) for a transmitter at
/// `(i, j)`. `out_power` must hold `width * height` values.
///
/// # Safety
/// Handles must be live; `out_power` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn bs_pathloss(
    twin: *const BsTwin,
    map: *const BsSiteMap,
    i: u32,
    j: u32,
    out_power: *mut f64,
    len: usize,
) -> BsStatus {
    guard(|| {
        let (t, m) = (&as_ref(twin, "twin")?.0, &as_ref(map, "map")?.0);
        if len < m.cells() {
            return Err(Failure::new(BsStatus::BufferTooSmall, format!("need {} values", m.cells())));
        }
        let bs = Coord::new(i as usize, j as usize);
        if !m.in_bounds(bs) {
            return Err(Failure::new(BsStatus::InvalidArgument, format!("{bs} is out of bounds")));
        }
        let pl = t.pathloss(m, bs)?;
        slice::from_raw_parts_mut(out(out_power, "out_power")?, m.cells()).copy_from_slice(&pl.power);
        Ok(())
    })
}

/// Network metrics of `n` placements.
///
/// # Safety
/// Handles must be live; `coords` must hold `2 * n` values.
#[no_mangle]
pub unsafe extern "C" fn bs_evaluate(
    twin: *const BsTwin,
    map: *const BsSiteMap,
    coords_ij: *const u32,
    n: usize,
    out_metrics: *mut BsMetrics,
) -> BsStatus {
    guard(|| {
        let (t, m) = (&as_ref(twin, "twin")?.0, &as_ref(map, "map")?.0);
        let placements = coords(coords_ij, n)?;
        if let Some(c) = placements.iter().find(|c| !m.in_bounds(**c)) {
            return Err(Failure::new(BsStatus::InvalidArgument, format!("{c} is out of bounds")));
        }
        *out(out_metrics, "out_metrics")? = to_c(&metrics::evaluate(t, m, &placements)?);
        Ok(())
    })
}

/// Best single placement by full sweep of the deployable set.
///
/// # Safety
/// Handles must be live; `out_ij` must hold 2 values.
#[no_mangle]
pub unsafe extern "C" fn bs_exhaustive_single(
    twin: *const BsTwin,
    map: *const BsSiteMap,
    metric: BsMetric,
    out_ij: *mut u32,
    out_metrics: *mut BsMetrics,
) -> BsStatus {
    guard(|| {
        let (t, m) = (&as_ref(twin, "twin")?.0, &as_ref(map, "map")?.0);
        let metric = match metric {
            BsMetric::Coverage => Metric::Coverage,
            BsMetric::Capacity => Metric::Capacity,
        };
        let r = baselines::exhaustive_single(t, m, metric)?;
        write_coords(out_ij, 1, &r.placements)?;
        if let Some(o) = out_metrics.as_mut() {
            *o = to_c(&r.metrics);
        }
        Ok(())
    })
}

/// `n` distinct deployable cells drawn uniformly at random with `seed`.
///
/// # Safety
/// `map` must be live; `out_ij` must hold `2 * cap` values.
#[no_mangle]
pub unsafe extern "C" fn bs_heuristic(
    map: *const BsSiteMap,
    n: usize,
    seed: u64,
    out_ij: *mut u32,
    cap: usize,
) -> BsStatus {
    guard(|| {
        let m = &as_ref(map, "map")?.0;
        let mut r = rng::seeded(seed);
        let cells = baselines::heuristic_place(m, n, &mut r)?;
        write_coords(out_ij, cap, &cells)
    })
}

/// Loads a trained policy checkpoint from a NUL-terminated UTF-8 path.
///
/// # Safety
/// `path` must be a valid C string; `out_policy` must be valid.
#[no_mangle]
pub unsafe extern "C" fn bs_policy_load(path: *const c_char, out_policy: *mut *mut BsPolicy) -> BsStatus {
    guard(|| {
        let slot = out(out_policy, "out_policy")?;
        let path =
            CStr::from_ptr(as_ref(path, "path")?).to_str().map_err(|e| Failure::new(BsStatus::InvalidArgument, e))?;
        let (params, _) = load_checkpoint(Path::new(path)).map_err(|e| {
            use bsplace::agent::checkpoint::CheckpointError;
            let status = if matches!(e, CheckpointError::Io(_)) { BsStatus::Io } else { BsStatus::Parse };
            Failure::new(status, e)
        })?;
        *slot = boxed(BsPolicy(params));
        Ok(())
    })
}

/// # Safety
/// `policy` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bs_policy_free(policy: *mut BsPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Places `n` base stations greedily with the policy and reports the
/// resulting metrics (may be null).
///
/// # Safety
/// Handles must be live; `out_ij` must hold `2 * cap` values.
#[no_mangle]
pub unsafe extern "C" fn bs_policy_deploy(
    policy: *const BsPolicy,
    twin: *const BsTwin,
    map: *const BsSiteMap,
    n: usize,
    out_ij: *mut u32,
    cap: usize,
    out_metrics: *mut BsMetrics,
) -> BsStatus {
    guard(|| {
        let p = &as_ref(policy, "policy")?.0;
        let (t, m) = (&as_ref(twin, "twin")?.0, &as_ref(map, "map")?.0);
        if (m.width(), m.height()) != (p.width, p.height) {
            return Err(Failure::new(
                BsStatus::InvalidArgument,
                format!("policy expects {}x{} maps, got {}x{}", p.width, p.height, m.width(), m.height()),
            ));
        }
        if n == 0 || n > m.deployable_count() {
            return Err(Failure::new(BsStatus::InvalidArgument, format!("cannot place {n} base stations")));
        }
        let mut res = evaluate_policy(p, std::slice::from_ref(m), t, n)
            .map_err(|e| Failure::new(BsStatus::InvalidArgument, e))?;
        let (cells, metrics) = res.pop().expect("one map");
        write_coords(out_ij, cap, &cells)?;
        if let Some(o) = out_metrics.as_mut() {
            *o = to_c(&metrics);
        }
        Ok(())
    })
}
