//! Primal-dual hybrid gradient iteration with dual extrapolation.
//!
//! Rescaled form with `b = p / σ`:
//!
//! ```text
//! x⁺ = prox_G(x - τσ Kᵀ b̄)
//! y⁺ = prox_{h/σ}(b + K x⁺)
//! b⁺ = b + K x⁺ - y⁺
//! b̄⁺ = b⁺ + θ (b⁺ - b)
//! ```
//!
//! `G` is the indicator of the feasible set for the infimal-convolution models
//! (so its prox is the voxelwise projection) and `½‖u - f‖²` for M1. Every
//! block of `K` owns one `(y, b, b̄)` chain and one threshold `weight / σ`;
//! chains never mix.

use std::time::Instant;

use crate::diffops::{adjoint_add_into, forward_into, slot_of, DiffOperator, Model, Slot};
use crate::error::{Error, Result};
use crate::par;
use crate::prox::{coupled_shrink_in_place, project_into};
use crate::solver::{median_filter_z, squared_distance, ModelParams, SolveReport};
use crate::volume::{grouped_norm_21_raw, Dims, SplitState, Volume};

/// Snapshot handed to observers after each iteration.
pub struct IterationInfo<'a> {
    /// 1-based iteration count.
    pub iteration: usize,
    pub state: &'a SplitState,
    /// Energy of `state`, when evaluated this iteration.
    pub energy: Option<f64>,
    pub rel_change: f64,
}

enum PrimalStep<'a> {
    /// Projection onto `{u + s + l = f, 0 <= u <= 1}`.
    Project(&'a [f64]),
    /// Prox of `½‖u - f‖²`; `s` and `l` stay zero.
    Quadratic(&'a [f64]),
}

struct DualBlock {
    slot: Slot,
    op: DiffOperator,
    weight: f64,
    /// Constant subtracted from `K_b x` inside the norm.
    offset: Option<Vec<f64>>,
    b: Vec<f64>,
    bbar: Vec<f64>,
    kx: Vec<f64>,
    y: Vec<f64>,
}

impl DualBlock {
    fn new(dims: Dims, slot: Slot, op: DiffOperator, weight: f64, offset: Option<Vec<f64>>) -> Self {
        let len = dims.len() * op.channels();
        DualBlock {
            slot,
            op,
            weight,
            offset,
            b: vec![0.0; len],
            bbar: vec![0.0; len],
            kx: vec![0.0; len],
            y: vec![0.0; len],
        }
    }

    /// Dual update from the new primal iterate. Returns the weighted norm
    /// term of the energy when `with_energy` is set.
    fn update(&mut self, dims: Dims, x: &SplitState, sigma: f64, theta: f64, with_energy: bool) -> f64 {
        let n = dims.len();
        let ch = self.op.channels();
        let src = slot_of(x, self.slot).as_slice();
        for (c, &st) in self.op.stencils().iter().enumerate() {
            forward_into(st, dims, src, &mut self.kx[c * n..(c + 1) * n]);
        }
        if let Some(off) = &self.offset {
            par::for_each_chunk_mut(&mut self.kx, par::BLOCK, |blk, chunk| {
                let o = &off[blk * par::BLOCK..];
                chunk.iter_mut().zip(o).for_each(|(k, o)| *k -= o);
            });
        }
        let energy = if with_energy {
            self.weight * grouped_norm_21_raw(&self.kx, n, ch)
        } else {
            0.0
        };
        // r = K x - offset + b, then y = shrink(r)
        {
            let b = &self.b;
            par::for_each_chunk_mut2(&mut self.kx, &mut self.y, par::BLOCK, |blk, r, y| {
                let b = &b[blk * par::BLOCK..];
                for n in 0..r.len() {
                    r[n] += b[n];
                    y[n] = r[n];
                }
            });
        }
        coupled_shrink_in_place(&mut self.y, n, ch, self.weight / sigma);
        let (r, y) = (&self.kx, &self.y);
        par::for_each_chunk_mut2(&mut self.b, &mut self.bbar, par::BLOCK, |blk, b, bbar| {
            let off = blk * par::BLOCK;
            for n in 0..b.len() {
                let nb = r[off + n] - y[off + n];
                bbar[n] = nb + theta * (nb - b[n]);
                b[n] = nb;
            }
        });
        energy
    }
}

fn validate_input(f: &Volume, params: &ModelParams, expected: &[Model]) -> Result<()> {
    if !expected.contains(&params.model) {
        return Err(Error::param(
            "model",
            format!("{} is not handled by this solver", params.model),
        ));
    }
    params.validate()?;
    f.check_unit_range()
}

/// Solves the IC or ICREV model for `f ∈ [0, 1]^N`.
///
/// Starts from `(f, 0, 0)` with zero duals. Every iterate is feasible.
pub fn solve_pdhg(f: &Volume, params: &ModelParams) -> Result<(SplitState, SolveReport)> {
    solve_pdhg_with(f, params, |_| {})
}

/// [`solve_pdhg`] with a callback after every iteration.
pub fn solve_pdhg_with<F>(f: &Volume, params: &ModelParams, observer: F) -> Result<(SplitState, SolveReport)>
where
    F: FnMut(&IterationInfo),
{
    validate_input(f, params, &[Model::Ic, Model::IcRev])?;
    let dims = f.dims();
    let blocks = params
        .model
        .blocks()
        .iter()
        .zip(params.block_weights())
        .map(|(&(slot, op), w)| DualBlock::new(dims, slot, op, w, None))
        .collect();
    Ok(run(dims, PrimalStep::Project(f.as_slice()), blocks, SplitState::trivial(f), params, observer))
}

/// M1 destriping: median filter of length `median_len` along `z`, then
/// `argmin_u ½‖g - u‖² + ν₁‖∇_y(g - u)‖₁ + ν₂‖∇_{x,z}u‖_{2,1}` on the filtered `g`.
pub fn solve_m1(f: &Volume, nu1: f64, nu2: f64, median_len: usize) -> Result<Volume> {
    Ok(solve_m1_with(f, &ModelParams::m1(nu1, nu2), median_len, |_| {})?.0)
}

pub fn solve_m1_with<F>(
    f: &Volume,
    params: &ModelParams,
    median_len: usize,
    observer: F,
) -> Result<(Volume, SolveReport)>
where
    F: FnMut(&IterationInfo),
{
    validate_input(f, params, &[Model::M1])?;
    let g = median_filter_z(f, median_len)?;
    let dims = g.dims();
    let weights = params.block_weights();
    let blocks = Model::M1
        .blocks()
        .iter()
        .zip(weights)
        .map(|(&(slot, op), w)| {
            let offset = (op == DiffOperator::GradY).then(|| op.apply(&g).into_vec());
            DualBlock::new(dims, slot, op, w, offset)
        })
        .collect();
    if params.nu1 == 0.0 && params.nu2 == 0.0 {
        // Without regularization the minimizer is the data itself.
        let report = SolveReport {
            iterations: 0,
            energy_trace: Vec::new(),
            final_rel_change: 0.0,
            converged: true,
            energy_stride: params.energy_stride,
            wall_time_secs: 0.0,
        };
        return Ok((g, report));
    }
    let x0 = SplitState::new(g.clone(), Volume::zeros(dims), Volume::zeros(dims))?;
    let (x, report) = run(dims, PrimalStep::Quadratic(g.as_slice()), blocks, x0, params, observer);
    Ok((x.u, report))
}

fn run<F>(
    dims: Dims,
    primal: PrimalStep,
    mut blocks: Vec<DualBlock>,
    x0: SplitState,
    params: &ModelParams,
    mut observer: F,
) -> (SplitState, SolveReport)
where
    F: FnMut(&IterationInfo),
{
    let start = Instant::now();
    let tau_sigma = params.tau * params.sigma;
    let mut x = x0;
    let mut next = SplitState::zeros(dims);
    let mut cand = SplitState::zeros(dims);
    let mut trace = Vec::new();
    let mut rel_change = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=params.max_iters {
        iterations = it;
        // x - τσ Kᵀ b̄
        cand.u.as_mut_slice().copy_from_slice(x.u.as_slice());
        cand.s.as_mut_slice().copy_from_slice(x.s.as_slice());
        cand.l.as_mut_slice().copy_from_slice(x.l.as_slice());
        let n = dims.len();
        for blk in &blocks {
            let target = match blk.slot {
                Slot::U => cand.u.as_mut_slice(),
                Slot::S => cand.s.as_mut_slice(),
                Slot::L => cand.l.as_mut_slice(),
            };
            for (c, &st) in blk.op.stencils().iter().enumerate() {
                adjoint_add_into(st, dims, &blk.bbar[c * n..(c + 1) * n], target, -tau_sigma);
            }
        }
        match primal {
            PrimalStep::Project(f) => {
                project_into(cand.u.as_slice(), cand.s.as_slice(), cand.l.as_slice(), f, &mut next)
            }
            PrimalStep::Quadratic(f) => {
                let tau = params.tau;
                let c = cand.u.as_slice();
                par::for_each_chunk_mut(next.u.as_mut_slice(), par::BLOCK, |blk, out| {
                    let off = blk * par::BLOCK;
                    for (n, o) in out.iter_mut().enumerate() {
                        *o = (c[off + n] + tau * f[off + n]) / (1.0 + tau);
                    }
                });
            }
        }
        let diff = squared_distance(next.u.as_slice(), x.u.as_slice())
            + squared_distance(next.s.as_slice(), x.s.as_slice())
            + squared_distance(next.l.as_slice(), x.l.as_slice());
        let base = x.dot(&x).unwrap_or(0.0);
        rel_change = if base > 0.0 { (diff / base).sqrt() } else { diff.sqrt() };
        std::mem::swap(&mut x, &mut next);

        let last = it == params.max_iters;
        let with_energy = it % params.energy_stride == 0 || last;
        let mut energy = 0.0;
        for blk in &mut blocks {
            energy += blk.update(dims, &x, params.sigma, params.theta, with_energy);
        }
        if let PrimalStep::Quadratic(f) = primal {
            if with_energy {
                energy += 0.5 * squared_distance(x.u.as_slice(), f);
            }
        }
        let energy = with_energy.then_some(energy);
        if let Some(e) = energy {
            trace.push(e);
        }
        observer(&IterationInfo {
            iteration: it,
            state: &x,
            energy,
            rel_change,
        });
        // The first step leaves the start point unchanged (all duals are zero).
        if it >= 2 && rel_change < params.rel_tol {
            converged = true;
            if !with_energy {
                trace.push(final_energy(&blocks, &x, &primal, dims));
            }
            break;
        }
    }

    let report = SolveReport {
        iterations,
        energy_trace: trace,
        final_rel_change: rel_change,
        converged,
        energy_stride: params.energy_stride,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    (x, report)
}

fn final_energy(blocks: &[DualBlock], x: &SplitState, primal: &PrimalStep, dims: Dims) -> f64 {
    let n = dims.len();
    let mut total = 0.0;
    for blk in blocks {
        let mut k = blk.op.apply(slot_of(x, blk.slot)).into_vec();
        if let Some(off) = &blk.offset {
            k.iter_mut().zip(off).for_each(|(a, b)| *a -= b);
        }
        total += blk.weight * grouped_norm_21_raw(&k, n, blk.op.channels());
    }
    if let PrimalStep::Quadratic(f) = primal {
        total += 0.5 * squared_distance(x.u.as_slice(), f);
    }
    total
}
