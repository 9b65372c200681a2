use crate::error::{Error, Result};
use crate::par;
use crate::volume::Volume;

/// Sliding median of odd length `len` along `z`, replicating the first and
/// last slice beyond the boundary. `len = 1` is the identity.
pub fn median_filter_z(v: &Volume, len: usize) -> Result<Volume> {
    if len == 0 || len % 2 == 0 {
        return Err(Error::param("median_len", format!("must be odd and >= 1, got {len}")));
    }
    if len == 1 {
        return Ok(v.clone());
    }
    let dims = v.dims();
    let sl = dims.slice_len();
    let half = (len / 2) as isize;
    let last = dims.nz as isize - 1;
    let src = v.as_slice();
    let mut out = vec![0.0; dims.len()];
    par::for_each_chunk_mut(&mut out, sl, |k, slice| {
        let mut window = vec![0.0; len];
        for (n, o) in slice.iter_mut().enumerate() {
            for (d, w) in window.iter_mut().enumerate() {
                let kk = (k as isize + d as isize - half).clamp(0, last) as usize;
                *w = src[kk * sl + n];
            }
            let (_, m, _) = window.select_nth_unstable_by(len / 2, f64::total_cmp);
            *o = *m;
        }
    });
    Ok(Volume::from_raw(dims, out))
}
