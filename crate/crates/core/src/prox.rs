//! Proximal maps used by the primal-dual iteration and the projection onto
//! the feasible set `C = {(u, s, l) : u + s + l = f, 0 <= u <= 1}`.

use crate::error::{Error, Result};
use crate::par;
use crate::volume::{SplitState, StackedField, Volume};

/// Nonnegative shrinkage threshold.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Threshold(f64);

impl Threshold {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::param("lambda", format!("threshold must be finite and >= 0, got {lambda}")));
        }
        Ok(Threshold(lambda))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// `S_λ(t)`: zero inside `[-λ, λ]`, otherwise shrunk towards zero by `λ`.
#[inline]
pub fn soft_shrink_scalar(t: f64, lambda: f64) -> f64 {
    let a = t.abs();
    if a <= lambda {
        0.0
    } else {
        t * (1.0 - lambda / a)
    }
}

/// Entrywise soft shrinkage.
pub fn soft_shrink(w: &StackedField, lambda: Threshold) -> StackedField {
    let mut out = w.clone();
    soft_shrink_in_place(out.as_mut_slice(), lambda.0);
    out
}

/// Group shrinkage of each voxel's channel vector.
///
/// For one channel this coincides with [`soft_shrink`].
pub fn coupled_shrink(w: &StackedField, lambda: Threshold) -> StackedField {
    let mut out = w.clone();
    let n = w.dims().len();
    coupled_shrink_in_place(out.as_mut_slice(), n, w.channels(), lambda.0);
    out
}

pub(crate) fn soft_shrink_in_place(data: &mut [f64], lambda: f64) {
    par::for_each_chunk_mut(data, par::BLOCK, |_, chunk| {
        chunk
            .iter_mut()
            .for_each(|t| *t = soft_shrink_scalar(*t, lambda))
    });
}

pub(crate) fn coupled_shrink_in_place(data: &mut [f64], n: usize, channels: usize, lambda: f64) {
    match channels {
        1 => soft_shrink_in_place(data, lambda),
        2 => {
            let (a, b) = data.split_at_mut(n);
            par::for_each_chunk_mut2(a, b, par::BLOCK, |_, ca, cb| {
                for (x, y) in ca.iter_mut().zip(cb.iter_mut()) {
                    let scale = group_scale((*x * *x + *y * *y).sqrt(), lambda);
                    *x *= scale;
                    *y *= scale;
                }
            });
        }
        3 => {
            let (a, rest) = data.split_at_mut(n);
            let (b, c) = rest.split_at_mut(n);
            par::for_each_chunk_mut3(a, b, c, par::BLOCK, |_, ca, cb, cc| {
                for ((x, y), z) in ca.iter_mut().zip(cb.iter_mut()).zip(cc.iter_mut()) {
                    let scale = group_scale((*x * *x + *y * *y + *z * *z).sqrt(), lambda);
                    *x *= scale;
                    *y *= scale;
                    *z *= scale;
                }
            });
        }
        _ => {
            for i in 0..n {
                let norm = (0..channels)
                    .map(|c| data[i + c * n] * data[i + c * n])
                    .sum::<f64>()
                    .sqrt();
                let scale = group_scale(norm, lambda);
                for c in 0..channels {
                    data[i + c * n] *= scale;
                }
            }
        }
    }
}

#[inline]
fn group_scale(norm: f64, lambda: f64) -> f64 {
    if norm <= lambda {
        0.0
    } else {
        1.0 - lambda / norm
    }
}

/// Euclidean projection of `(a, b, c)` onto `{u + s + l = f, 0 <= u <= 1}`.
///
/// The plane projection subtracts `(a + b + c - f) / 3` from every entry. If
/// that leaves `u` outside `[0, 1]`, `u` is clamped and `(b, c)` is projected
/// onto the line `s + l = f - u`. `l` is formed last as `f - u - s`.
#[inline]
pub fn project_voxel(a: f64, b: f64, c: f64, f: f64) -> (f64, f64, f64) {
    let shift = (a + b + c - f) / 3.0;
    let u = a - shift;
    let (u, s) = if (0.0..=1.0).contains(&u) {
        (u, b - shift)
    } else {
        let u = u.clamp(0.0, 1.0);
        let mu = (b + c - (f - u)) / 2.0;
        (u, b - mu)
    };
    (u, s, (f - u) - s)
}

/// Voxelwise projection onto `C`.
pub fn project_c(a: &Volume, b: &Volume, c: &Volume, f: &Volume) -> Result<SplitState> {
    let dims = f.dims();
    for v in [a, b, c] {
        if v.dims() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims.to_string(),
                actual: v.dims().to_string(),
            });
        }
    }
    let mut out = SplitState::zeros(dims);
    project_into(
        a.as_slice(),
        b.as_slice(),
        c.as_slice(),
        f.as_slice(),
        &mut out,
    );
    Ok(out)
}

pub(crate) fn project_into(a: &[f64], b: &[f64], c: &[f64], f: &[f64], out: &mut SplitState) {
    let SplitState { u, s, l } = out;
    par::for_each_chunk_mut3(
        u.as_mut_slice(),
        s.as_mut_slice(),
        l.as_mut_slice(),
        par::BLOCK,
        |blk, cu, cs, cl| {
            let off = blk * par::BLOCK;
            for n in 0..cu.len() {
                let i = off + n;
                let (pu, ps, pl) = project_voxel(a[i], b[i], c[i], f[i]);
                cu[n] = pu;
                cs[n] = ps;
                cl[n] = pl;
            }
        },
    );
}
