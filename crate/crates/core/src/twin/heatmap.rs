//! Power heatmap export.
//!
//! Values are converted to dBm and mapped affinely onto `[0, 1]` over a
//! caller-supplied window, clamped at both ends. The greyscale export
//! stores `round(255 * t)`. The false-color export interpolates linearly
//! between five stops at t = 0, 0.25, 0.5, 0.75, 1:
//!
//! | t    | RGB             |
//! |------|-----------------|
//! | 0.00 | 68, 1, 84       |
//! | 0.25 | 59, 82, 139     |
//! | 0.50 | 33, 145, 140    |
//! | 0.75 | 94, 201, 98     |
//! | 1.00 | 253, 231, 37    |
//!
//! and rounds each channel to the nearest integer.

use crate::pnm;
use crate::twin::watts_to_dbm;

pub const COLOR_STOPS: [[u8; 3]; 5] = [[68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37]];

fn unit(dbm: f64, min_db: f64, max_db: f64) -> f64 {
    if max_db <= min_db {
        return if dbm >= max_db { 1.0 } else { 0.0 };
    }
    ((dbm - min_db) / (max_db - min_db)).clamp(0.0, 1.0)
}

pub fn gray_level(watts: f64, min_db: f64, max_db: f64) -> u8 {
    (255.0 * unit(watts_to_dbm(watts), min_db, max_db)).round() as u8
}

pub fn false_color(watts: f64, min_db: f64, max_db: f64) -> [u8; 3] {
    let t = unit(watts_to_dbm(watts), min_db, max_db) * 4.0;
    let k = (t.floor() as usize).min(3);
    let f = t - k as f64;
    let (a, b) = (COLOR_STOPS[k], COLOR_STOPS[k + 1]);
    std::array::from_fn(|c| (a[c] as f64 + f * (b[c] as f64 - a[c] as f64)).round() as u8)
}

/// Minimum and maximum of the raster in dBm.
pub fn db_range(power: &[f64]) -> (f64, f64) {
    power
        .iter()
        .map(|&p| watts_to_dbm(p))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)))
}

pub fn to_pgm(width: usize, height: usize, power: &[f64], min_db: f64, max_db: f64) -> Vec<u8> {
    let px: Vec<u8> = power.iter().map(|&p| gray_level(p, min_db, max_db)).collect();
    pnm::write_pgm(width, height, &px)
}

pub fn to_ppm(width: usize, height: usize, power: &[f64], min_db: f64, max_db: f64) -> Vec<u8> {
    let rgb: Vec<u8> = power.iter().flat_map(|&p| false_color(p, min_db, max_db)).collect();
    pnm::write_ppm(width, height, &rgb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::twin::dbm_to_watts;

    #[test]
    fn window_mapping() {
        assert_eq!(gray_level(dbm_to_watts(-120.0), -120.0, -40.0), 0);
        assert_eq!(gray_level(dbm_to_watts(-40.0), -120.0, -40.0), 255);
        assert_eq!(gray_level(dbm_to_watts(-10.0), -120.0, -40.0), 255);
        assert_eq!(gray_level(dbm_to_watts(-100.0), -120.0, -40.0), 64);
    }

    #[test]
    fn ramp_hits_stops() {
        for (k, stop) in COLOR_STOPS.iter().enumerate() {
            let dbm = -100.0 + 20.0 * k as f64;
            assert_eq!(false_color(dbm_to_watts(dbm), -100.0, -20.0), *stop);
        }
        // a quarter of the way between the first two stops
        assert_eq!(false_color(dbm_to_watts(-95.0), -100.0, -20.0), [66, 21, 98]);
    }

    #[test]
    fn headers() {
        let img = to_ppm(2, 1, &[1e-3, 1e-9], -100.0, 0.0);
        assert!(img.starts_with(b"P6\n2 1\n255\n"));
        assert_eq!(img.len(), 11 + 6);
        let img = to_pgm(2, 1, &[1e-3, 1e-9], -100.0, 0.0);
        assert_eq!(img.len(), 11 + 2);
    }
}
