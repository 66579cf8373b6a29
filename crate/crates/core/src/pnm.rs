//! Binary PGM (`P5`) and PPM (`P6`) rasters with maxval 255.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PnmError {
    #[error("malformed header: {0}")]
    Header(String),
    #[error("unsupported maxval {0} (expected 255)")]
    Maxval(u32),
    #[error("raster truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
}

/// Greyscale raster, row-major, one byte per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gray {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b' ' | b'\t' | b'\r' | b'\n' | 0x0b | 0x0c => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, PnmError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(PnmError::Header(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PnmError::Header(format!("bad {what}")))
    }
}

pub fn read_pgm(bytes: &[u8]) -> Result<Gray, PnmError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(PnmError::Header("magic is not P5".into()));
    }
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(PnmError::Header("zero dimension".into()));
    }
    if maxval != 255 {
        return Err(PnmError::Maxval(maxval));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(cur.pos) {
        Some(c) if c.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(PnmError::Header("missing separator after maxval".into())),
    }
    let expected = width * height;
    let data = &bytes[cur.pos..];
    if data.len() < expected {
        return Err(PnmError::Truncated { expected, found: data.len() });
    }
    Ok(Gray { width, height, pixels: data[..expected].to_vec() })
}

pub fn write_pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// `rgb` holds three bytes per pixel.
pub fn write_ppm(width: usize, height: usize, rgb: &[u8]) -> Vec<u8> {
    assert_eq!(rgb.len(), 3 * width * height);
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(rgb);
    out
}
