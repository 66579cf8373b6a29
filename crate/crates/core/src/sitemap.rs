//! Raster site maps: building occupancy, the deployable set and the
//! receiver region.

use std::fmt;

use thiserror::Error;

use crate::pnm::{self, PnmError};
use crate::rng::{self, Fnv64};

/// Grid cell `(row, column)`. Ordering is lexicographic, which is the
/// canonical order used wherever placements are sorted or tie-broken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Coord {
    pub i: usize,
    pub j: usize,
}

impl Coord {
    pub const fn new(i: usize, j: usize) -> Self {
        Coord { i, j }
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.i, self.j)
    }
}

impl std::str::FromStr for Coord {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (i, j) = s
            .trim()
            .split_once(':')
            .or_else(|| s.trim().split_once(','))
            .ok_or_else(|| format!("expected i:j, got {s:?}"))?;
        let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
        Ok(Coord { i: parse(i)?, j: parse(j)? })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SiteMapError {
    #[error(transparent)]
    Raster(#[from] PnmError),
    #[error("dimension mismatch: raster is {expected:?}, {what} is {found:?}")]
    DimensionMismatch { what: &'static str, expected: (usize, usize), found: (usize, usize) },
    #[error("empty deployable set")]
    EmptyDeployable,
    #[error("empty receiver region")]
    EmptyReceiver,
    #[error("receiver mask marks building cell {0}")]
    ReceiverOnBuilding(Coord),
    #[error("cell size must be positive and finite, got {0}")]
    CellSize(f64),
    #[error("invalid generator parameters: {0}")]
    Params(String),
    #[error("no layout with a 3x3 open region after {0} attempts")]
    Unsatisfiable(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Flip columns: `(i, j) -> (i, width - 1 - j)`.
    Horizontal,
    /// Flip rows: `(i, j) -> (height - 1 - i, j)`.
    Vertical,
}

/// Immutable raster site. All per-cell vectors are row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteMap {
    width: usize,
    height: usize,
    cell_size: f64,
    occupancy: Vec<bool>,
    deployable: Vec<bool>,
    receiver: Vec<bool>,
    map_id: u64,
}

impl SiteMap {
    /// Builds a map from an occupancy raster and optional override masks.
    /// Without overrides both the deployable set and the receiver region
    /// are the open cells. A deployable override may include building
    /// cells (rooftop sites); a receiver override may not.
    pub fn new(
        width: usize,
        height: usize,
        cell_size: f64,
        occupancy: Vec<bool>,
        deployable: Option<Vec<bool>>,
        receiver: Option<Vec<bool>>,
    ) -> Result<Self, SiteMapError> {
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(SiteMapError::CellSize(cell_size));
        }
        let n = width * height;
        assert_eq!(occupancy.len(), n, "occupancy length");
        let open: Vec<bool> = occupancy.iter().map(|&b| !b).collect();
        let deployable = match deployable {
            Some(mask) => {
                assert_eq!(mask.len(), n, "deployable length");
                mask
            }
            None => open.clone(),
        };
        let receiver = match receiver {
            Some(mask) => {
                assert_eq!(mask.len(), n, "receiver length");
                if let Some(k) = (0..n).find(|&k| mask[k] && occupancy[k]) {
                    return Err(SiteMapError::ReceiverOnBuilding(Coord::new(k / width, k % width)));
                }
                mask
            }
            None => open,
        };
        if !deployable.iter().any(|&b| b) {
            return Err(SiteMapError::EmptyDeployable);
        }
        if !receiver.iter().any(|&b| b) {
            return Err(SiteMapError::EmptyReceiver);
        }
        let mut map = SiteMap { width, height, cell_size, occupancy, deployable, receiver, map_id: 0 };
        map.map_id = map.content_hash();
        Ok(map)
    }

    /// Map with no buildings.
    pub fn open(width: usize, height: usize, cell_size: f64) -> Result<Self, SiteMapError> {
        SiteMap::new(width, height, cell_size, vec![false; width * height], None, None)
    }

    fn content_hash(&self) -> u64 {
        let mut h = Fnv64::default();
        h.write_u32(self.width as u32);
        h.write_u32(self.height as u32);
        h.write_f64(self.cell_size);
        for mask in [&self.occupancy, &self.deployable, &self.receiver] {
            for &b in mask.iter() {
                h.write(&[b as u8]);
            }
        }
        h.finish()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> usize {
        self.width * self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn map_id(&self) -> u64 {
        self.map_id
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupancy
    }

    pub fn deployable(&self) -> &[bool] {
        &self.deployable
    }

    pub fn receiver(&self) -> &[bool] {
        &self.receiver
    }

    pub fn index(&self, c: Coord) -> usize {
        c.i * self.width + c.j
    }

    pub fn coord(&self, index: usize) -> Coord {
        Coord::new(index / self.width, index % self.width)
    }

    pub fn in_bounds(&self, c: Coord) -> bool {
        c.i < self.height && c.j < self.width
    }

    pub fn is_building(&self, c: Coord) -> bool {
        self.occupancy[self.index(c)]
    }

    pub fn is_deployable(&self, c: Coord) -> bool {
        self.in_bounds(c) && self.deployable[self.index(c)]
    }

    /// Deployable cells in row-major order.
    pub fn deployable_cells(&self) -> Vec<Coord> {
        (0..self.cells()).filter(|&k| self.deployable[k]).map(|k| self.coord(k)).collect()
    }

    pub fn deployable_count(&self) -> usize {
        self.deployable.iter().filter(|&&b| b).count()
    }

    pub fn receiver_count(&self) -> usize {
        self.receiver.iter().filter(|&&b| b).count()
    }

    pub fn occupied_fraction(&self) -> f64 {
        self.occupancy.iter().filter(|&&b| b).count() as f64 / self.cells() as f64
    }

    pub fn mirror(&self, axis: Axis) -> SiteMap {
        let (w, h) = (self.width, self.height);
        let flip = |v: &[bool]| -> Vec<bool> {
            (0..w * h)
                .map(|k| {
                    let (i, j) = (k / w, k % w);
                    let (si, sj) = match axis {
                        Axis::Horizontal => (i, w - 1 - j),
                        Axis::Vertical => (h - 1 - i, j),
                    };
                    v[si * w + sj]
                })
                .collect()
        };
        let mut map = SiteMap {
            width: w,
            height: h,
            cell_size: self.cell_size,
            occupancy: flip(&self.occupancy),
            deployable: flip(&self.deployable),
            receiver: flip(&self.receiver),
            map_id: 0,
        };
        map.map_id = map.content_hash();
        map
    }

    /// Canonical PGM encodings of the occupancy raster and both masks
    /// (pixel values 0 and 255 only).
    pub fn to_pgm(&self) -> SiteMapRasters {
        let enc = |v: &[bool]| {
            let px: Vec<u8> = v.iter().map(|&b| if b { 255 } else { 0 }).collect();
            pnm::write_pgm(self.width, self.height, &px)
        };
        SiteMapRasters {
            occupancy: enc(&self.occupancy),
            deployable: enc(&self.deployable),
            receiver: enc(&self.receiver),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SiteMapRasters {
    pub occupancy: Vec<u8>,
    pub deployable: Vec<u8>,
    pub receiver: Vec<u8>,
}

/// Decodes a map from PGM bytes. Building cells are pixels `>= 128`; mask
/// cells are members when non-zero.
pub fn load_sitemap(
    raster: &[u8],
    cell_size: f64,
    deployable_mask: Option<&[u8]>,
    receiver_mask: Option<&[u8]>,
) -> Result<SiteMap, SiteMapError> {
    let base = pnm::read_pgm(raster)?;
    let dims = (base.width, base.height);
    let mask = |bytes: Option<&[u8]>, what: &'static str| -> Result<Option<Vec<bool>>, SiteMapError> {
        let Some(bytes) = bytes else { return Ok(None) };
        let g = pnm::read_pgm(bytes)?;
        if (g.width, g.height) != dims {
            return Err(SiteMapError::DimensionMismatch { what, expected: dims, found: (g.width, g.height) });
        }
        Ok(Some(g.pixels.iter().map(|&p| p != 0).collect()))
    };
    let deployable = mask(deployable_mask, "deployable mask")?;
    let receiver = mask(receiver_mask, "receiver mask")?;
    let occupancy = base.pixels.iter().map(|&p| p >= 128).collect();
    SiteMap::new(base.width, base.height, cell_size, occupancy, deployable, receiver)
}

/// Procedural city-block generator parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub width: usize,
    pub height: usize,
    pub cell_size: f64,
    /// Target occupied fraction, `0 <= density < 0.9`.
    pub building_density: f64,
    /// Inclusive side-length range of each rectangle, in cells.
    pub building_size: (usize, usize),
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams { width: 64, height: 64, cell_size: 8.0, building_density: 0.3, building_size: (4, 12) }
    }
}

pub const MAX_GENERATION_ATTEMPTS: usize = 1000;

/// Places axis-aligned rectangles until the occupied fraction reaches the
/// target density. A layout is accepted only if it keeps at least one fully
/// open 3x3 window; otherwise the next attempt continues the same stream.
///
/// Draw order per rectangle: height, width, top row, left column, each via
/// [`rng::below`] on one xoshiro256** stream seeded with `seed`.
pub fn generate_synthetic(seed: u64, params: &SynthParams) -> Result<SiteMap, SiteMapError> {
    let SynthParams { width, height, cell_size, building_density, building_size } = *params;
    if width == 0 || height == 0 {
        return Err(SiteMapError::Params("zero dimension".into()));
    }
    if !(0.0..0.9).contains(&building_density) {
        return Err(SiteMapError::Params(format!("density {building_density} outside [0, 0.9)")));
    }
    let (min_side, max_side) = building_size;
    if min_side == 0 || min_side > max_side {
        return Err(SiteMapError::Params(format!("bad building size range {min_side}..={max_side}")));
    }
    let n = width * height;
    let target = building_density * n as f64;
    let mut stream = rng::seeded(seed);
    for _attempt in 0..MAX_GENERATION_ATTEMPTS {
        let mut occupancy = vec![false; n];
        let mut filled = 0usize;
        let mut rectangles = 0usize;
        while (filled as f64) < target && rectangles < 16 * n {
            rectangles += 1;
            let span = (max_side - min_side + 1) as u64;
            let bh = (min_side + rng::below(&mut stream, span) as usize).min(height);
            let bw = (min_side + rng::below(&mut stream, span) as usize).min(width);
            let top = rng::below(&mut stream, (height - bh + 1) as u64) as usize;
            let left = rng::below(&mut stream, (width - bw + 1) as u64) as usize;
            for i in top..top + bh {
                for j in left..left + bw {
                    let k = i * width + j;
                    if !occupancy[k] {
                        occupancy[k] = true;
                        filled += 1;
                    }
                }
            }
        }
        if (filled as f64) < target || !has_open_window(&occupancy, width, height) {
            continue;
        }
        return SiteMap::new(width, height, cell_size, occupancy, None, None);
    }
    Err(SiteMapError::Unsatisfiable(MAX_GENERATION_ATTEMPTS))
}

fn has_open_window(occupancy: &[bool], width: usize, height: usize) -> bool {
    if width < 3 || height < 3 {
        return false;
    }
    (0..=height - 3).any(|i| (0..=width - 3).any(|j| (i..i + 3).all(|r| (j..j + 3).all(|c| !occupancy[r * width + c]))))
}
