//! Binary checkpoint of network weights plus the training config.
//!
//! Little-endian layout: magic `ABSP`, `u32` version, `u32` map width,
//! `u32` map height, `u32` layer count, then per layer (hidden layers in
//! order, policy head, value head) `u32` rows (fan-in), `u32` cols
//! (fan-out), `f32` weights row-major, `f32` biases; finally a `u32`
//! byte length and that many bytes of UTF-8 `key=value` lines.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use thiserror::Error;

use super::net::{Dense, PolicyParams};
use super::ppo::PpoConfig;

pub const MAGIC: &[u8; 4] = b"ABSP";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint (bad magic)")]
    Magic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("inconsistent layer dimensions: {0}")]
    Dims(String),
    #[error("bad config block: {0}")]
    Config(String),
}

fn put_u32(w: &mut impl Write, v: usize) -> io::Result<()> {
    let v = u32::try_from(v).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "dimension exceeds u32"))?;
    w.write_all(&v.to_le_bytes())
}

fn get_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_f32s(r: &mut impl Read, n: usize) -> io::Result<Vec<f64>> {
    let mut buf = vec![0u8; 4 * n];
    r.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect())
}

pub fn write_checkpoint(w: &mut impl Write, params: &PolicyParams, cfg: &PpoConfig) -> Result<(), CheckpointError> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    put_u32(w, params.width)?;
    put_u32(w, params.height)?;
    put_u32(w, params.hidden.len() + 2)?;
    for d in params.layers() {
        put_u32(w, d.fan_in())?;
        put_u32(w, d.fan_out())?;
        for &v in d.w.iter().chain(d.b.iter()) {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    let kv = cfg.to_kv();
    put_u32(w, kv.len())?;
    w.write_all(kv.as_bytes())?;
    Ok(())
}

pub fn read_checkpoint(r: &mut impl Read) -> Result<(PolicyParams, PpoConfig), CheckpointError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::Magic);
    }
    let version = get_u32(r)?;
    if version != VERSION {
        return Err(CheckpointError::Version(version));
    }
    let width = get_u32(r)? as usize;
    let height = get_u32(r)? as usize;
    let count = get_u32(r)? as usize;
    if count < 2 || width == 0 || height == 0 {
        return Err(CheckpointError::Dims(format!("{count} layers for a {width}x{height} map")));
    }
    // bound allocations by the previous layer's width before reading
    let mut expect_in = PolicyParams::input_len(width, height);
    let mut layers = Vec::with_capacity(count);
    for k in 0..count {
        let rows = get_u32(r)? as usize;
        let cols = get_u32(r)? as usize;
        if rows != expect_in {
            return Err(CheckpointError::Dims(format!("layer {k} has {rows} inputs, expected {expect_in}")));
        }
        let is_head = k + 2 >= count;
        if !is_head {
            expect_in = cols;
        }
        if cols == 0 || cols > 1 << 20 {
            return Err(CheckpointError::Dims(format!("layer {k} has {cols} outputs")));
        }
        let w = get_f32s(r, rows * cols)?;
        let b = get_f32s(r, cols)?;
        layers.push(Dense { w: Array2::from_shape_vec((rows, cols), w).expect("length checked"), b: Array1::from(b) });
    }
    let value = layers.pop().expect("count >= 2");
    let policy = layers.pop().expect("count >= 2");
    let params = PolicyParams { width, height, hidden: layers, policy, value };
    if !params.dims_consistent() {
        return Err(CheckpointError::Dims("heads do not match the map size".into()));
    }
    let len = get_u32(r)? as usize;
    let mut text = Vec::new();
    r.take(len as u64).read_to_end(&mut text)?;
    if text.len() != len {
        return Err(CheckpointError::Config("truncated".into()));
    }
    let text = String::from_utf8(text).map_err(|e| CheckpointError::Config(e.to_string()))?;
    let cfg = PpoConfig::from_kv(&text).map_err(CheckpointError::Config)?;
    Ok((params, cfg))
}

pub fn save_checkpoint(path: &Path, params: &PolicyParams, cfg: &PpoConfig) -> Result<(), CheckpointError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, params, cfg)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(PolicyParams, PpoConfig), CheckpointError> {
    read_checkpoint(&mut BufReader::new(File::open(path)?))
}

/// Rounds every parameter through `f32`, the precision a checkpoint keeps.
pub fn quantize(params: &PolicyParams) -> PolicyParams {
    let mut q = params.clone();
    for d in q.layers_mut() {
        d.w.mapv_inplace(|v| v as f32 as f64);
        d.b.mapv_inplace(|v| v as f32 as f64);
    }
    q
}
