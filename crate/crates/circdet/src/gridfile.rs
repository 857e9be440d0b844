//! `.grid` files: one JSON header line, then the cells as little-endian `f32`.
//!
//! ```text
//! {"width":128,"height":128,"channels":1,"dtype":"f32","layout":"row-major","scale":4}\n
//! <width * height * channels * 4 bytes>
//! ```
//!
//! Cells are stored row-major with channels interleaved, the same order as
//! [`Grid::data`].

use std::path::{Path, PathBuf};

use circdet_core::targets::PredictionMaps;
use circdet_core::Grid;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::fsio;

pub const EXTENSION: &str = "grid";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub dtype: String,
    pub layout: String,
    /// Output stride R of the maps.
    pub scale: usize,
}

pub fn encode(grid: &Grid, scale: usize) -> Vec<u8> {
    let (width, height, channels) = grid.dims();
    let header = Header {
        width,
        height,
        channels,
        dtype: "f32".into(),
        layout: "row-major".into(),
        scale,
    };
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(b'\n');
    out.reserve(grid.data().len() * 4);
    for &v in grid.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> std::result::Result<(Grid, usize), String> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or("missing header line")?;
    let header: Header = serde_json::from_slice(&bytes[..nl]).map_err(|e| format!("header: {e}"))?;
    if header.dtype != "f32" {
        return Err(format!("header.dtype: unsupported \"{}\"", header.dtype));
    }
    if header.layout != "row-major" {
        return Err(format!("header.layout: unsupported \"{}\"", header.layout));
    }
    if header.scale == 0 {
        return Err("header.scale: must be positive".into());
    }
    let payload = &bytes[nl + 1..];
    let cells = header
        .width
        .checked_mul(header.height)
        .and_then(|n| n.checked_mul(header.channels))
        .ok_or("header: grid size overflows")?;
    if payload.len() != cells * 4 {
        return Err(format!(
            "payload: expected {} bytes for {}x{}x{}, found {}",
            cells * 4,
            header.width,
            header.height,
            header.channels,
            payload.len()
        ));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let grid = Grid::from_vec(header.width, header.height, header.channels, data).map_err(|e| e.to_string())?;
    Ok((grid, header.scale))
}

pub fn write(path: &Path, grid: &Grid, scale: usize) -> Result<()> {
    fsio::write_atomic(path, &encode(grid, scale))
}

pub fn read(path: &Path) -> Result<(Grid, usize)> {
    let bytes = fsio::read_bytes(path)?;
    decode(&bytes).map_err(|m| CliError::format(path, m))
}

/// `<dir>/image-<id>.<head>.grid`
pub fn map_path(dir: &Path, image_id: u64, head: &str) -> PathBuf {
    dir.join(format!("image-{image_id}.{head}.{EXTENSION}"))
}

pub fn write_maps(dir: &Path, image_id: u64, maps: &PredictionMaps, scale: usize) -> Result<()> {
    write(&map_path(dir, image_id, "heatmap"), &maps.heatmap, scale)?;
    write(&map_path(dir, image_id, "offset"), &maps.offset, scale)?;
    write(&map_path(dir, image_id, "radius"), &maps.radius, scale)
}

/// Reads the three heads of one image. All must share one scale.
pub fn read_maps(dir: &Path, image_id: u64) -> Result<(PredictionMaps, usize)> {
    let (heatmap, s1) = read(&map_path(dir, image_id, "heatmap"))?;
    let (offset, s2) = read(&map_path(dir, image_id, "offset"))?;
    let (radius, s3) = read(&map_path(dir, image_id, "radius"))?;
    if s1 != s2 || s1 != s3 {
        return Err(CliError::format(
            &map_path(dir, image_id, "heatmap"),
            format!("header.scale: heads disagree ({s1}, {s2}, {s3})"),
        ));
    }
    let maps = PredictionMaps {
        heatmap,
        offset,
        radius,
    };
    maps.validate()?;
    Ok((maps, s1))
}
