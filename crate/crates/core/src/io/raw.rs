use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Dims, Volume};

/// Sidecar describing a headerless little-endian float file.
///
/// `order` must be `"C"`: the file is laid out as `[nz][ny][nx]` with `x`
/// fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawSidecar {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    #[serde(default = "default_dtype")]
    pub dtype: String,
    #[serde(default = "default_order")]
    pub order: String,
}

fn default_dtype() -> String {
    "float32".into()
}

fn default_order() -> String {
    "C".into()
}

fn sidecar_path(path: &Path) -> Option<PathBuf> {
    let mut appended = path.as_os_str().to_owned();
    appended.push(".json");
    let appended = PathBuf::from(appended);
    if appended.exists() {
        return Some(appended);
    }
    let replaced = path.with_extension("json");
    (replaced != path && replaced.exists()).then_some(replaced)
}

/// Decodes `bytes` (the content of `path`) using its sidecar.
pub fn read_raw(path: &Path, bytes: &[u8]) -> Result<Volume> {
    let side = sidecar_path(path).ok_or_else(|| {
        Error::format(path, "not an NPY file and no JSON sidecar (<file>.json) found")
    })?;
    let text = std::fs::read_to_string(&side)
        .map_err(|e| Error::io(format!("reading {}", side.display()), e))?;
    let meta: RawSidecar = serde_json::from_str(&text)
        .map_err(|e| Error::format(&side, format!("invalid sidecar: {e}")))?;
    if meta.order != "C" {
        return Err(Error::format(&side, format!("unsupported order {:?}; only \"C\" is accepted", meta.order)));
    }
    let dims = Dims::new(meta.nx, meta.ny, meta.nz)?;
    let width = match meta.dtype.as_str() {
        "float32" | "<f4" | "f4" => 4,
        "float64" | "<f8" | "f8" => 8,
        other => return Err(Error::format(&side, format!("unsupported dtype {other:?}"))),
    };
    if bytes.len() != dims.len() * width {
        return Err(Error::format(
            path,
            format!("{} bytes on disk, sidecar describes {} ({dims} x {width})", bytes.len(), dims.len() * width),
        ));
    }
    let data = if width == 4 {
        bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect()
    } else {
        bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect()
    };
    Volume::from_vec(dims, data).map_err(|e| Error::format(path, e.to_string()))
}
