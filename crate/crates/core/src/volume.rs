//! Volumes, stacked vector fields and the `(u, s, l)` split.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

/// Voxel counts per axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];
}

impl Dims {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::EmptyDims(nx, ny, nz));
        }
        Ok(Dims { nx, ny, nz })
    }

    /// Cube with side `n`.
    pub fn cube(n: usize) -> Result<Self> {
        Self::new(n, n, n)
    }

    /// Total voxel count `N`.
    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Voxels in one `x`-`y` slice.
    #[inline]
    pub fn slice_len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nx * (j + self.ny * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let i = idx % self.nx;
        let j = (idx / self.nx) % self.ny;
        let k = idx / self.slice_len();
        (i, j, k)
    }

    pub fn extent(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => self.nx,
            Axis::Y => self.ny,
            Axis::Z => self.nz,
        }
    }

    pub fn stride(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => 1,
            Axis::Y => self.nx,
            Axis::Z => self.nx * self.ny,
        }
    }

    pub(crate) fn check_same(&self, other: &Dims) -> Result<()> {
        if self != other {
            return Err(Error::DimensionMismatch {
                expected: self.to_string(),
                actual: other.to_string(),
            });
        }
        Ok(())
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.nx, self.ny, self.nz)
    }
}

fn check_finite(data: &[f64]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(idx) => Err(Error::NonFinite(idx)),
        None => Ok(()),
    }
}

/// Scalar 3D field stored `x`-fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume {
    dims: Dims,
    data: Vec<f64>,
}

impl Volume {
    pub fn zeros(dims: Dims) -> Self {
        Self::filled(dims, 0.0)
    }

    pub fn filled(dims: Dims, value: f64) -> Self {
        Volume {
            dims,
            data: vec![value; dims.len()],
        }
    }

    /// Wraps `data`, which must have `dims.len()` finite entries.
    pub fn from_vec(dims: Dims, data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} values ({dims})", dims.len()),
                actual: format!("{} values", data.len()),
            });
        }
        check_finite(&data)?;
        Ok(Volume { dims, data })
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dims.len());
        for k in 0..dims.nz {
            for j in 0..dims.ny {
                for i in 0..dims.nx {
                    data.push(f(i, j, k));
                }
            }
        }
        Volume { dims, data }
    }

    pub(crate) fn from_raw(dims: Dims, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dims.len());
        Volume { dims, data }
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.dims.index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let idx = self.dims.index(i, j, k);
        self.data[idx] = value;
    }

    /// `x-y` slice `k` as a flat row-major `[ny][nx]` view.
    pub fn slice_z(&self, k: usize) -> &[f64] {
        let n = self.dims.slice_len();
        &self.data[k * n..(k + 1) * n]
    }

    /// Smallest and largest value.
    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Rejects data outside `[0, 1]`, reporting the offending extrema.
    pub fn check_unit_range(&self) -> Result<()> {
        let (min, max) = self.min_max();
        if min < 0.0 || max > 1.0 {
            return Err(Error::OutOfRange { min, max });
        }
        Ok(())
    }

    pub fn dot(&self, other: &Volume) -> Result<f64> {
        self.dims.check_same(&other.dims)?;
        Ok(dot(&self.data, &other.data))
    }

    pub fn norm2(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync + Send) -> Volume {
        let mut out = self.data.clone();
        par::for_each_chunk_mut(&mut out, par::BLOCK, |_, c| c.iter_mut().for_each(|v| *v = f(*v)));
        Volume::from_raw(self.dims, out)
    }

    pub fn sum(&self) -> f64 {
        par::sum_blocks(self.data.len(), |r| self.data[r].iter().sum())
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }
}

/// Returns `a*x + b*y`.
pub fn linear_combine(a: f64, x: &Volume, b: f64, y: &Volume) -> Result<Volume> {
    x.dims.check_same(&y.dims)?;
    let mut out = vec![0.0; x.data.len()];
    par::for_each_chunk_mut(&mut out, par::BLOCK, |c, chunk| {
        let off = c * par::BLOCK;
        for (n, o) in chunk.iter_mut().enumerate() {
            *o = a * x.data[off + n] + b * y.data[off + n];
        }
    });
    Ok(Volume::from_raw(x.dims, out))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    par::sum_blocks(a.len(), |r| a[r.clone()].iter().zip(&b[r]).map(|(x, y)| x * y).sum())
}

/// `d` stacked volumes; channel `c` occupies `[c*N, (c+1)*N)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StackedField {
    dims: Dims,
    channels: usize,
    data: Vec<f64>,
}

impl StackedField {
    pub fn zeros(dims: Dims, channels: usize) -> Self {
        StackedField {
            dims,
            channels,
            data: vec![0.0; dims.len() * channels],
        }
    }

    pub fn from_vec(dims: Dims, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::param("channels", "must be at least 1"));
        }
        if data.len() != dims.len() * channels {
            return Err(Error::DimensionMismatch {
                expected: format!("{} values ({channels} x {dims})", dims.len() * channels),
                actual: format!("{} values", data.len()),
            });
        }
        check_finite(&data)?;
        Ok(StackedField {
            dims,
            channels,
            data,
        })
    }

    /// Stacks single-channel volumes in order.
    pub fn stack(parts: &[&Volume]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::param("channels", "must be at least 1"))?;
        let mut data = Vec::with_capacity(first.dims.len() * parts.len());
        for p in parts {
            first.dims.check_same(&p.dims)?;
            data.extend_from_slice(&p.data);
        }
        Ok(StackedField {
            dims: first.dims,
            channels: parts.len(),
            data,
        })
    }

    pub(crate) fn from_raw(dims: Dims, channels: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dims.len() * channels);
        StackedField {
            dims,
            channels,
            data,
        }
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.dims.len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_volume(&self, c: usize) -> Volume {
        Volume::from_raw(self.dims, self.channel(c).to_vec())
    }

    pub fn scaled(&self, alpha: f64) -> StackedField {
        StackedField::from_raw(
            self.dims,
            self.channels,
            self.data.iter().map(|v| alpha * v).collect(),
        )
    }

    pub fn dot(&self, other: &StackedField) -> Result<f64> {
        self.check_shape(other)?;
        Ok(dot(&self.data, &other.data))
    }

    pub(crate) fn check_shape(&self, other: &StackedField) -> Result<()> {
        self.dims.check_same(&other.dims)?;
        if self.channels != other.channels {
            return Err(Error::DimensionMismatch {
                expected: format!("{} channels", self.channels),
                actual: format!("{} channels", other.channels),
            });
        }
        Ok(())
    }

    /// `‖w‖_{2,1}`: sum over voxels of the Euclidean norm across channels.
    pub fn grouped_norm_21(&self) -> f64 {
        grouped_norm_21_raw(&self.data, self.dims.len(), self.channels)
    }

    /// Sum of absolute values of all entries.
    pub fn norm_l1(&self) -> f64 {
        norm_l1_raw(&self.data)
    }
}

pub fn grouped_norm_21(w: &StackedField) -> f64 {
    w.grouped_norm_21()
}

pub fn norm_l1(w: &StackedField) -> f64 {
    w.norm_l1()
}

pub(crate) fn grouped_norm_21_raw(data: &[f64], n: usize, channels: usize) -> f64 {
    if channels == 1 {
        return norm_l1_raw(data);
    }
    par::sum_blocks(n, |r| {
        r.map(|i| {
            (0..channels)
                .map(|c| {
                    let v = data[i + c * n];
                    v * v
                })
                .sum::<f64>()
                .sqrt()
        })
        .sum()
    })
}

pub(crate) fn norm_l1_raw(data: &[f64]) -> f64 {
    par::sum_blocks(data.len(), |r| data[r].iter().map(|v| v.abs()).sum())
}

/// The primal triple: clean image, stripes, laminar part.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitState {
    pub u: Volume,
    pub s: Volume,
    pub l: Volume,
}

impl SplitState {
    /// `(f, 0, 0)`, always feasible for `f` in `[0, 1]`.
    pub fn trivial(f: &Volume) -> Self {
        SplitState {
            u: f.clone(),
            s: Volume::zeros(f.dims()),
            l: Volume::zeros(f.dims()),
        }
    }

    pub fn zeros(dims: Dims) -> Self {
        SplitState {
            u: Volume::zeros(dims),
            s: Volume::zeros(dims),
            l: Volume::zeros(dims),
        }
    }

    pub fn new(u: Volume, s: Volume, l: Volume) -> Result<Self> {
        u.dims.check_same(&s.dims)?;
        u.dims.check_same(&l.dims)?;
        Ok(SplitState { u, s, l })
    }

    pub fn dims(&self) -> Dims {
        self.u.dims()
    }

    /// `u + s + l` voxelwise.
    pub fn sum(&self) -> Volume {
        let (u, s, l) = (&self.u.data, &self.s.data, &self.l.data);
        let mut out = vec![0.0; u.len()];
        par::for_each_chunk_mut(&mut out, par::BLOCK, |c, chunk| {
            let off = c * par::BLOCK;
            for (n, o) in chunk.iter_mut().enumerate() {
                let i = off + n;
                *o = u[i] + s[i] + l[i];
            }
        });
        Volume::from_raw(self.dims(), out)
    }

    /// `max |u + s + l - f|`.
    pub fn max_constraint_residual(&self, f: &Volume) -> Result<f64> {
        self.dims().check_same(&f.dims())?;
        let (u, s, l, f) = (&self.u.data, &self.s.data, &self.l.data, &f.data);
        Ok(par::max_blocks(u.len(), |r| {
            r.map(|i| (u[i] + s[i] + l[i] - f[i]).abs())
                .fold(0.0, f64::max)
        })
        .max(0.0))
    }

    /// Largest distance of `u` outside `[0, 1]`.
    pub fn max_range_violation(&self) -> f64 {
        let (lo, hi) = self.u.min_max();
        (-lo).max(hi - 1.0).max(0.0)
    }

    pub fn dot(&self, other: &SplitState) -> Result<f64> {
        Ok(self.u.dot(&other.u)? + self.s.dot(&other.s)? + self.l.dot(&other.l)?)
    }
}
