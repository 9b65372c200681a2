//! Directional difference operators, their adjoints and the stacked operator `K`.
//!
//! All operators are matrix-free stencils that reproduce the Kronecker-product
//! matrices exactly:
//!
//! * `D_x = I ⊗ I ⊗ D_nx`, `D_y = I ⊗ D_ny ⊗ I`, `D_z = D_nz ⊗ I ⊗ I` with the
//!   forward difference matrix `D_m` whose last row is zero (constant extension);
//! * `D_zz = D²_nz ⊗ I ⊗ I` with the second difference matrix whose first and
//!   last rows are zero (linear extension).
//!
//! An axis of length 1 yields an identically zero first difference, and an
//! axis of length at most 2 an identically zero second difference, which is
//! what makes single-slice (`nz = 1`) images work without special cases.

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::volume::{Axis, Dims, SplitState, StackedField, Volume};

/// Elementary one-channel stencil.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stencil {
    /// Forward difference along an axis.
    D1(Axis),
    /// Central second difference along `z`.
    D2Z,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DiffOperator {
    Dx,
    Dy,
    Dz,
    Dzz,
    /// `∇_y = D_y`
    GradY,
    /// `∇_{x,z} = (D_x; D_z)`
    GradXZ,
    /// `∇_{x,y} = (D_x; D_y)`
    GradXY,
    /// `∇_{x,y,z} = (D_x; D_y; D_z)`
    GradXYZ,
    /// `Δ_z = D_zz`
    LapZ,
}

impl DiffOperator {
    pub const ALL: [DiffOperator; 9] = [
        DiffOperator::Dx,
        DiffOperator::Dy,
        DiffOperator::Dz,
        DiffOperator::Dzz,
        DiffOperator::GradY,
        DiffOperator::GradXZ,
        DiffOperator::GradXY,
        DiffOperator::GradXYZ,
        DiffOperator::LapZ,
    ];

    /// Channel stencils in output order.
    pub fn stencils(self) -> &'static [Stencil] {
        use Stencil::*;
        match self {
            DiffOperator::Dx => &[D1(Axis::X)],
            DiffOperator::Dy | DiffOperator::GradY => &[D1(Axis::Y)],
            DiffOperator::Dz => &[D1(Axis::Z)],
            DiffOperator::Dzz | DiffOperator::LapZ => &[D2Z],
            DiffOperator::GradXZ => &[D1(Axis::X), D1(Axis::Z)],
            DiffOperator::GradXY => &[D1(Axis::X), D1(Axis::Y)],
            DiffOperator::GradXYZ => &[D1(Axis::X), D1(Axis::Y), D1(Axis::Z)],
        }
    }

    pub fn channels(self) -> usize {
        self.stencils().len()
    }

    pub fn apply(self, v: &Volume) -> StackedField {
        let dims = v.dims();
        let n = dims.len();
        let mut out = vec![0.0; n * self.channels()];
        for (c, &st) in self.stencils().iter().enumerate() {
            forward_into(st, dims, v.as_slice(), &mut out[c * n..(c + 1) * n]);
        }
        StackedField::from_raw(dims, self.channels(), out)
    }

    /// Transpose applied to a field with matching channel count.
    pub fn adjoint(self, w: &StackedField) -> Result<Volume> {
        if w.channels() != self.channels() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} channels for {self:?}", self.channels()),
                actual: format!("{} channels", w.channels()),
            });
        }
        let dims = w.dims();
        let mut out = vec![0.0; dims.len()];
        for (c, &st) in self.stencils().iter().enumerate() {
            adjoint_add_into(st, dims, w.channel(c), &mut out, 1.0);
        }
        Ok(Volume::from_raw(dims, out))
    }
}

/// Forward difference along `axis`.
pub fn apply_d1(v: &Volume, axis: Axis) -> StackedField {
    let mut out = vec![0.0; v.dims().len()];
    forward_into(Stencil::D1(axis), v.dims(), v.as_slice(), &mut out);
    StackedField::from_raw(v.dims(), 1, out)
}

/// Second difference along `z` (`D²` with zero boundary rows).
pub fn apply_d2z(v: &Volume) -> StackedField {
    let mut out = vec![0.0; v.dims().len()];
    forward_into(Stencil::D2Z, v.dims(), v.as_slice(), &mut out);
    StackedField::from_raw(v.dims(), 1, out)
}

pub fn apply_adjoint_d1(w: &StackedField, axis: Axis) -> Result<Volume> {
    single_channel_adjoint(w, Stencil::D1(axis))
}

pub fn apply_adjoint_d2z(w: &StackedField) -> Result<Volume> {
    single_channel_adjoint(w, Stencil::D2Z)
}

fn single_channel_adjoint(w: &StackedField, st: Stencil) -> Result<Volume> {
    if w.channels() != 1 {
        return Err(Error::DimensionMismatch {
            expected: "1 channel".into(),
            actual: format!("{} channels", w.channels()),
        });
    }
    let mut out = vec![0.0; w.dims().len()];
    adjoint_add_into(st, w.dims(), w.as_slice(), &mut out, 1.0);
    Ok(Volume::from_raw(w.dims(), out))
}

pub fn apply_composite(v: &Volume, op: DiffOperator) -> StackedField {
    op.apply(v)
}

#[inline]
fn interior2(k: usize, m: usize) -> bool {
    k >= 1 && k + 2 <= m
}

/// Writes `stencil(src)` into `dst`. Both slices have length `dims.len()`.
pub(crate) fn forward_into(st: Stencil, dims: Dims, src: &[f64], dst: &mut [f64]) {
    let (nx, ny, nz) = (dims.nx, dims.ny, dims.nz);
    let sl = dims.slice_len();
    par::for_each_chunk_mut(dst, sl, |k, out| {
        let cur = &src[k * sl..(k + 1) * sl];
        match st {
            Stencil::D1(Axis::X) => {
                for (o_row, s_row) in out.chunks_exact_mut(nx).zip(cur.chunks_exact(nx)) {
                    for i in 0..nx - 1 {
                        o_row[i] = s_row[i + 1] - s_row[i];
                    }
                    o_row[nx - 1] = 0.0;
                }
            }
            Stencil::D1(Axis::Y) => {
                for j in 0..ny - 1 {
                    let (a, b) = (&cur[j * nx..(j + 1) * nx], &cur[(j + 1) * nx..(j + 2) * nx]);
                    for (o, (x0, x1)) in out[j * nx..(j + 1) * nx].iter_mut().zip(a.iter().zip(b)) {
                        *o = x1 - x0;
                    }
                }
                out[(ny - 1) * nx..].fill(0.0);
            }
            Stencil::D1(Axis::Z) => {
                if k + 1 < nz {
                    let next = &src[(k + 1) * sl..(k + 2) * sl];
                    for (o, (x0, x1)) in out.iter_mut().zip(cur.iter().zip(next)) {
                        *o = x1 - x0;
                    }
                } else {
                    out.fill(0.0);
                }
            }
            Stencil::D2Z => {
                if interior2(k, nz) {
                    let prev = &src[(k - 1) * sl..k * sl];
                    let next = &src[(k + 1) * sl..(k + 2) * sl];
                    for n in 0..sl {
                        out[n] = prev[n] - 2.0 * cur[n] + next[n];
                    }
                } else {
                    out.fill(0.0);
                }
            }
        }
    });
}

/// `dst += scale * stencilᵀ(src)`.
pub(crate) fn adjoint_add_into(st: Stencil, dims: Dims, src: &[f64], dst: &mut [f64], scale: f64) {
    let (nx, ny, nz) = (dims.nx, dims.ny, dims.nz);
    let sl = dims.slice_len();
    par::for_each_chunk_mut(dst, sl, |k, out| {
        let w = &src[k * sl..(k + 1) * sl];
        match st {
            Stencil::D1(Axis::X) => {
                for (o_row, w_row) in out.chunks_exact_mut(nx).zip(w.chunks_exact(nx)) {
                    for i in 0..nx {
                        let mut t = 0.0;
                        if i >= 1 {
                            t += w_row[i - 1];
                        }
                        if i + 1 < nx {
                            t -= w_row[i];
                        }
                        o_row[i] += scale * t;
                    }
                }
            }
            Stencil::D1(Axis::Y) => {
                for j in 0..ny {
                    for i in 0..nx {
                        let mut t = 0.0;
                        if j >= 1 {
                            t += w[(j - 1) * nx + i];
                        }
                        if j + 1 < ny {
                            t -= w[j * nx + i];
                        }
                        out[j * nx + i] += scale * t;
                    }
                }
            }
            Stencil::D1(Axis::Z) => {
                let prev = (k >= 1).then(|| &src[(k - 1) * sl..k * sl]);
                let own = (k + 1 < nz).then_some(w);
                for n in 0..sl {
                    let mut t = 0.0;
                    if let Some(p) = prev {
                        t += p[n];
                    }
                    if let Some(c) = own {
                        t -= c[n];
                    }
                    out[n] += scale * t;
                }
            }
            Stencil::D2Z => {
                let next = interior2(k + 1, nz).then(|| &src[(k + 1) * sl..(k + 2) * sl]);
                let own = interior2(k, nz).then_some(w);
                let prev = (k >= 1 && interior2(k - 1, nz)).then(|| &src[(k - 1) * sl..k * sl]);
                for n in 0..sl {
                    let mut t = 0.0;
                    if let Some(p) = next {
                        t += p[n];
                    }
                    if let Some(c) = own {
                        t -= 2.0 * c[n];
                    }
                    if let Some(p) = prev {
                        t += p[n];
                    }
                    out[n] += scale * t;
                }
            }
        }
    });
}

/// Which component of the primal triple a block of `K` acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    U,
    S,
    L,
}

/// Variational model; selects the block structure of `K`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// `μ₁‖∇_{x,z}u‖_{2,1} + μ₂‖Δ_z u‖₁ + ‖∇_y s‖₁ + μ₃‖∇_{x,y}l‖_{2,1}`
    Ic,
    /// `μ₁‖∇_{x,y,z}u‖_{2,1} + ‖∇_y s‖₁ + μ₃‖∇_{x,y}l‖_{2,1}`
    IcRev,
    /// Generalized destriping: `K = (∇_y; ∇_{x,z})` acting on `u` only.
    M1,
}

impl Model {
    /// Block rows of `K`: which slot each block reads and with which operator.
    pub fn blocks(self) -> &'static [(Slot, DiffOperator)] {
        match self {
            Model::Ic => &[
                (Slot::U, DiffOperator::GradXZ),
                (Slot::U, DiffOperator::LapZ),
                (Slot::S, DiffOperator::GradY),
                (Slot::L, DiffOperator::GradXY),
            ],
            Model::IcRev => &[
                (Slot::U, DiffOperator::GradXYZ),
                (Slot::S, DiffOperator::GradY),
                (Slot::L, DiffOperator::GradXY),
            ],
            Model::M1 => &[(Slot::U, DiffOperator::GradY), (Slot::U, DiffOperator::GradXZ)],
        }
    }

    /// Upper bound on `‖K‖₂²` used by the step-size guard.
    ///
    /// `‖D_m‖² ≤ 4` and `‖D²_m‖² ≤ 16`; blocks acting on the same slot add up,
    /// blocks on different slots take the maximum.
    pub fn norm_bound(self) -> f64 {
        match self {
            Model::Ic => 24.0,
            Model::IcRev | Model::M1 => 12.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Model::Ic => "ic",
            Model::IcRev => "icrev",
            Model::M1 => "m1",
        }
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

pub(crate) fn slot_of(x: &SplitState, slot: Slot) -> &Volume {
    match slot {
        Slot::U => &x.u,
        Slot::S => &x.s,
        Slot::L => &x.l,
    }
}

/// Output of `K`: one stacked field per block row.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockField {
    pub model: Model,
    pub blocks: Vec<StackedField>,
}

impl BlockField {
    pub fn zeros(model: Model, dims: Dims) -> Self {
        BlockField {
            model,
            blocks: model
                .blocks()
                .iter()
                .map(|&(_, op)| StackedField::zeros(dims, op.channels()))
                .collect(),
        }
    }

    pub fn dot(&self, other: &BlockField) -> Result<f64> {
        self.check_shape(other.model, &other.blocks)?;
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.dot(b))
            .sum()
    }

    fn check_shape(&self, model: Model, blocks: &[StackedField]) -> Result<()> {
        if model != self.model || blocks.len() != self.blocks.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} blocks of model {}", self.blocks.len(), self.model),
                actual: format!("{} blocks of model {model}", blocks.len()),
            });
        }
        Ok(())
    }

    pub fn norm2_sq(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| crate::volume::dot(b.as_slice(), b.as_slice()))
            .sum()
    }
}

/// `y = K x`.
pub fn apply_k(x: &SplitState, model: Model) -> BlockField {
    BlockField {
        model,
        blocks: model
            .blocks()
            .iter()
            .map(|&(slot, op)| op.apply(slot_of(x, slot)))
            .collect(),
    }
}

/// `Kᵀ y`; slots that no block reads come back zero.
pub fn apply_k_adjoint(y: &BlockField) -> Result<SplitState> {
    let model = y.model;
    if y.blocks.len() != model.blocks().len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} blocks", model.blocks().len()),
            actual: format!("{} blocks", y.blocks.len()),
        });
    }
    let dims = y
        .blocks
        .first()
        .map(|b| b.dims())
        .ok_or_else(|| Error::param("blocks", "empty"))?;
    let mut out = SplitState::zeros(dims);
    for (&(slot, op), w) in model.blocks().iter().zip(&y.blocks) {
        if w.channels() != op.channels() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} channels for {op:?}", op.channels()),
                actual: format!("{} channels", w.channels()),
            });
        }
        dims.check_same(&w.dims())?;
        let target = match slot {
            Slot::U => &mut out.u,
            Slot::S => &mut out.s,
            Slot::L => &mut out.l,
        };
        for (c, &st) in op.stencils().iter().enumerate() {
            adjoint_add_into(st, dims, w.channel(c), target.as_mut_slice(), 1.0);
        }
    }
    Ok(out)
}

/// Power-iteration estimate of `‖K‖₂²` after `iterations` steps on `KᵀK`.
///
/// Returns the Rayleigh quotient `‖K x_t‖² / ‖x_t‖²`, which never exceeds the
/// true value and is nondecreasing in `iterations`. The start vector is a fixed
/// pseudo-random draw so repeated calls agree.
pub fn estimate_norm_k(model: Model, dims: Dims, iterations: usize) -> Result<f64> {
    if iterations == 0 {
        return Err(Error::param("iterations", "must be at least 1"));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x00C0_FFEE);
    let mut rand_vol = || {
        let data = (0..dims.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Volume::from_raw(dims, data)
    };
    let mut x = SplitState {
        u: rand_vol(),
        s: rand_vol(),
        l: rand_vol(),
    };
    let mut lambda = 0.0;
    for _ in 0..iterations {
        x = apply_k_adjoint(&apply_k(&x, model))?;
        let norm = x.dot(&x)?.sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        for v in [&mut x.u, &mut x.s, &mut x.l] {
            v.as_mut_slice().iter_mut().for_each(|e| *e /= norm);
        }
        let nx = x.dot(&x)?;
        lambda = apply_k(&x, model).norm2_sq() / nx;
    }
    Ok(lambda)
}
