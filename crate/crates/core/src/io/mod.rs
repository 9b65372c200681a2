//! Volume files, slice images and atomic output.
//!
//! Volumes are exchanged as NPY v1.0 arrays of shape `[nz][ny][nx]` in C
//! order, which is exactly the in-memory layout (`x` fastest). Raw
//! little-endian float files with a JSON sidecar are accepted on input.

mod npy;
mod png16;
mod raw;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub use npy::{decode_npy, encode_npy, read_npy, write_npy, NpyDtype};
pub use png16::{export_slices, read_png16, SlicePlane, SliceSelection};
pub use raw::{read_raw, RawSidecar};

use crate::error::{Error, Result};
use crate::volume::Volume;

/// Reads a volume in either supported format without range checks.
///
/// Files starting with the NPY magic are parsed as NPY; anything else is
/// treated as raw data described by a sidecar (`<path>.json`, or the same
/// stem with a `.json` extension).
pub fn read_volume(path: &Path) -> Result<Volume> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    if bytes.starts_with(npy::MAGIC) {
        decode_npy(&bytes).map_err(|reason| Error::format(path, reason))
    } else {
        read_raw(path, &bytes)
    }
}

/// Reads an input image and checks that it lies in `[0, 1]`.
pub fn load_volume(path: &Path) -> Result<Volume> {
    let v = read_volume(path)?;
    v.check_unit_range().map_err(|e| match e {
        Error::OutOfRange { min, max } => Error::format(
            path,
            format!("values must lie in [0, 1]; found min = {min}, max = {max}"),
        ),
        other => other,
    })?;
    Ok(v)
}

/// Writes `v` as NPY v1.0 float64, C order, shape `[nz][ny][nx]`.
pub fn save_volume(v: &Volume, path: &Path) -> Result<()> {
    write_atomic(path, &encode_npy(v))
}

/// Writes `bytes` to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = temp_sibling(path);
    let ctx = |what: &str| format!("{what} {}", path.display());
    let result = (|| {
        let mut file = fs::File::create(&tmp).map_err(|e| Error::io(ctx("creating"), e))?;
        file.write_all(bytes).map_err(|e| Error::io(ctx("writing"), e))?;
        file.sync_all().map_err(|e| Error::io(ctx("syncing"), e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(ctx("renaming onto"), e))
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// Writes pretty JSON atomically.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_vec_pretty(value)?;
    text.push(b'\n');
    write_atomic(path, &text)
}

fn temp_sibling(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!(".{name}.{}.tmp", std::process::id()))
}
