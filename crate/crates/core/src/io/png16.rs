//! 16-bit grayscale slice export.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::volume::Volume;

/// Plane of a slice. `Xy` slices are indexed by `z`, `Xz` by `y`, `Yz` by `x`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlicePlane {
    Xy,
    Xz,
    Yz,
}

impl SlicePlane {
    fn name(self) -> &'static str {
        match self {
            SlicePlane::Xy => "xy",
            SlicePlane::Xz => "xz",
            SlicePlane::Yz => "yz",
        }
    }

    /// `(width, height, count)` of slices in this plane.
    fn shape(self, v: &Volume) -> (usize, usize, usize) {
        let d = v.dims();
        match self {
            SlicePlane::Xy => (d.nx, d.ny, d.nz),
            SlicePlane::Xz => (d.nx, d.nz, d.ny),
            SlicePlane::Yz => (d.ny, d.nz, d.nx),
        }
    }

    fn sample(self, v: &Volume, index: usize, col: usize, row: usize) -> f64 {
        match self {
            SlicePlane::Xy => v.get(col, row, index),
            SlicePlane::Xz => v.get(col, index, row),
            SlicePlane::Yz => v.get(index, col, row),
        }
    }
}

impl fmt::Display for SlicePlane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SlicePlane {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "xy" => Ok(SlicePlane::Xy),
            "xz" => Ok(SlicePlane::Xz),
            "yz" => Ok(SlicePlane::Yz),
            _ => Err(format!("unknown slice plane {s:?}; use xy, xz or yz")),
        }
    }
}

/// `plane:i,j,...`, e.g. `xy:0,16,31`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SliceSelection {
    pub plane: SlicePlane,
    pub indices: Vec<usize>,
}

impl FromStr for SliceSelection {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (plane, list) = s
            .split_once(':')
            .ok_or_else(|| format!("expected PLANE:INDICES (e.g. xy:0,5), got {s:?}"))?;
        let indices = list
            .split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|_| format!("invalid slice index {t:?}")))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(SliceSelection { plane: plane.parse()?, indices })
    }
}

fn to_u16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

/// Writes one PNG per selected slice as `<prefix>_<plane>_<index>.png`.
///
/// Values are clamped to `[0, 1]` and mapped linearly to `0..=65535`. All
/// indices are checked before anything is written.
pub fn export_slices(v: &Volume, selection: &SliceSelection, prefix: &Path) -> Result<Vec<PathBuf>> {
    let plane = selection.plane;
    let (width, height, count) = plane.shape(v);
    if let Some(bad) = selection.indices.iter().find(|&&i| i >= count) {
        return Err(Error::param(
            "slices",
            format!("{plane} index {bad} out of range (volume has {count} {plane} slices)"),
        ));
    }
    let stem = prefix
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "slice".into());
    let mut written = Vec::with_capacity(selection.indices.len());
    for &index in &selection.indices {
        let mut pixels = Vec::with_capacity(width * height * 2);
        for row in 0..height {
            for col in 0..width {
                pixels.extend_from_slice(&to_u16(plane.sample(v, index, col, row)).to_be_bytes());
            }
        }
        let path = prefix.with_file_name(format!("{stem}_{plane}_{index:04}.png"));
        let mut buf = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut buf, width as u32, height as u32);
            enc.set_color(png::ColorType::Grayscale);
            enc.set_depth(png::BitDepth::Sixteen);
            let mut w = enc
                .write_header()
                .map_err(|e| Error::format(&path, e.to_string()))?;
            w.write_image_data(&pixels)
                .map_err(|e| Error::format(&path, e.to_string()))?;
        }
        super::write_atomic(&path, &buf)?;
        written.push(path);
    }
    Ok(written)
}

/// Decodes a 16-bit grayscale PNG into `(width, height, samples)`.
pub fn read_png16(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut reader = png::Decoder::new(file)
        .read_info()
        .map_err(|e| Error::format(path, e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::format(path, e.to_string()))?;
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Sixteen {
        return Err(Error::format(path, "expected 16-bit grayscale"));
    }
    let samples = buf[..info.buffer_size()]
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect();
    Ok((info.width as usize, info.height as usize, samples))
}
