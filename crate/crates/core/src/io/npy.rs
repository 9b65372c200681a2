//! NPY v1.0 (and v2.0 on input) for 2D/3D float arrays.

use std::path::Path;

use crate::error::{Error, Result};
use crate::volume::{Dims, Volume};

pub(crate) const MAGIC: &[u8] = b"\x93NUMPY";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NpyDtype {
    F32,
    F64,
}

impl NpyDtype {
    fn width(self) -> usize {
        match self {
            NpyDtype::F32 => 4,
            NpyDtype::F64 => 8,
        }
    }
}

pub fn read_npy(path: &Path) -> Result<Volume> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode_npy(&bytes).map_err(|reason| Error::format(path, reason))
}

pub fn write_npy(v: &Volume, path: &Path) -> Result<()> {
    super::write_atomic(path, &encode_npy(v))
}

/// Serializes as `<f8`, C order, shape `(nz, ny, nx)`.
pub fn encode_npy(v: &Volume) -> Vec<u8> {
    let d = v.dims();
    let dict = format!(
        "{{'descr': '<f8', 'fortran_order': False, 'shape': ({}, {}, {}), }}",
        d.nz, d.ny, d.nx
    );
    // magic(6) + version(2) + len(2) + dict + padding + '\n' is a multiple of 64
    let unpadded = MAGIC.len() + 2 + 2 + dict.len() + 1;
    let pad = (64 - unpadded % 64) % 64;
    let header_len = dict.len() + pad + 1;
    let mut out = Vec::with_capacity(unpadded + pad + 8 * d.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header_len as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out.extend(std::iter::repeat(b' ').take(pad));
    out.push(b'\n');
    for x in v.as_slice() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode_npy(bytes: &[u8]) -> std::result::Result<Volume, String> {
    if !bytes.starts_with(MAGIC) || bytes.len() < 10 {
        return Err("not an NPY file (bad magic)".into());
    }
    let (major, minor) = (bytes[6], bytes[7]);
    let (header_len, start) = match major {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 if bytes.len() >= 12 => (
            u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize,
            12,
        ),
        _ => return Err(format!("unsupported NPY version {major}.{minor}")),
    };
    let header = bytes
        .get(start..start + header_len)
        .ok_or("truncated NPY header")?;
    let header = std::str::from_utf8(header).map_err(|_| "NPY header is not text")?;
    let descr = dict_value(header, "descr").ok_or("NPY header lacks 'descr'")?;
    let fortran = dict_value(header, "fortran_order").ok_or("NPY header lacks 'fortran_order'")?;
    let shape = dict_value(header, "shape").ok_or("NPY header lacks 'shape'")?;

    let dtype = match descr.trim_matches(|c| c == '\'' || c == '"') {
        "<f8" => NpyDtype::F64,
        "<f4" => NpyDtype::F32,
        other => {
            return Err(format!(
                "unsupported dtype {other}; expected little-endian float32 ('<f4') or float64 ('<f8')"
            ))
        }
    };
    match fortran {
        "False" => {}
        "True" => return Err("Fortran-order arrays are not supported; save in C order".into()),
        other => return Err(format!("invalid fortran_order value {other}")),
    }
    let dims_list: Vec<usize> = shape
        .trim_start_matches('(')
        .trim_end_matches(')')
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|_| format!("invalid shape entry {s:?}")))
        .collect::<std::result::Result<_, _>>()?;
    let dims = match dims_list.as_slice() {
        [nz, ny, nx] => Dims::new(*nx, *ny, *nz),
        [ny, nx] => Dims::new(*nx, *ny, 1),
        other => return Err(format!("expected a 2D or 3D array, got shape {other:?}")),
    }
    .map_err(|e| e.to_string())?;

    let payload = &bytes[start + header_len..];
    let expected = dims.len() * dtype.width();
    if payload.len() != expected {
        return Err(format!(
            "payload has {} bytes, shape {:?} of {:?} needs {expected}",
            payload.len(),
            dims_list,
            dtype
        ));
    }
    let data: Vec<f64> = match dtype {
        NpyDtype::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect(),
        NpyDtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect(),
    };
    Volume::from_vec(dims, data).map_err(|e| e.to_string())
}

/// Value text for `key` in a Python dict literal (flat, as written by numpy).
fn dict_value<'a>(header: &'a str, key: &str) -> Option<&'a str> {
    let pat_single = format!("'{key}'");
    let pat_double = format!("\"{key}\"");
    let at = header.find(&pat_single).map(|p| p + pat_single.len())
        .or_else(|| header.find(&pat_double).map(|p| p + pat_double.len()))?;
    let rest = header[at..].trim_start().strip_prefix(':')?.trim_start();
    let end = if rest.starts_with('(') {
        rest.find(')')? + 1
    } else {
        rest.find(|c| c == ',' || c == '}')?
    };
    Some(rest[..end].trim())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header_bytes(dict: &str) -> Vec<u8> {
        let mut h = dict.to_string();
        while (10 + h.len() + 1) % 64 != 0 {
            h.push(' ');
        }
        h.push('\n');
        let mut out = MAGIC.to_vec();
        out.extend_from_slice(&[1, 0]);
        out.extend_from_slice(&(h.len() as u16).to_le_bytes());
        out.extend_from_slice(h.as_bytes());
        out
    }

    #[test]
    fn header_layout_follows_v1() {
        let v = Volume::zeros(Dims::new(4, 3, 2).unwrap());
        let bytes = encode_npy(&v);
        assert_eq!(&bytes[..8], b"\x93NUMPY\x01\x00");
        let hl = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
        assert_eq!((10 + hl) % 64, 0);
        let header = std::str::from_utf8(&bytes[10..10 + hl]).unwrap();
        assert!(header.starts_with("{'descr': '<f8', 'fortran_order': False, 'shape': (2, 3, 4), }"));
        assert!(header.ends_with('\n'));
        assert_eq!(bytes.len(), 10 + hl + 8 * 24);
    }

    #[test]
    fn zeros_decode() {
        let v = Volume::zeros(Dims::cube(2).unwrap());
        assert_eq!(decode_npy(&encode_npy(&v)).unwrap(), v);
    }

    #[test]
    fn float32_is_widened() {
        let mut bytes = header_bytes("{'descr': '<f4', 'fortran_order': False, 'shape': (1, 2, 2), }");
        for x in [0.0f32, 0.25, 0.5, 1.0] {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
        let v = decode_npy(&bytes).unwrap();
        assert_eq!(v.dims(), Dims::new(2, 2, 1).unwrap());
        assert_eq!(v.as_slice(), &[0.0, 0.25, 0.5, 1.0]);
    }

    #[test]
    fn two_dimensional_arrays_are_single_slices() {
        let mut bytes = header_bytes("{'descr': '<f8', 'fortran_order': False, 'shape': (2, 3), }");
        for n in 0..6 {
            bytes.extend_from_slice(&(n as f64 / 10.0).to_le_bytes());
        }
        let v = decode_npy(&bytes).unwrap();
        assert_eq!(v.dims(), Dims::new(3, 2, 1).unwrap());
        assert_eq!(v.get(2, 1, 0), 0.5);
    }

    #[test]
    fn rejects_fortran_big_endian_and_bad_payload() {
        let mut bytes = header_bytes("{'descr': '<f8', 'fortran_order': True, 'shape': (1, 1, 2), }");
        bytes.extend_from_slice(&[0; 16]);
        assert!(decode_npy(&bytes).unwrap_err().contains("Fortran"));

        let mut bytes = header_bytes("{'descr': '>f8', 'fortran_order': False, 'shape': (1, 1, 2), }");
        bytes.extend_from_slice(&[0; 16]);
        assert!(decode_npy(&bytes).unwrap_err().contains("dtype"));

        let mut bytes = header_bytes("{'descr': '<f8', 'fortran_order': False, 'shape': (1, 1, 2), }");
        bytes.extend_from_slice(&[0; 8]);
        assert!(decode_npy(&bytes).unwrap_err().contains("payload"));

        let bytes = header_bytes("{'descr': '<f8', 'fortran_order': False, 'shape': (2,), }");
        assert!(decode_npy(&bytes).unwrap_err().contains("2D or 3D"));
        assert!(decode_npy(b"garbage").is_err());
    }
}
