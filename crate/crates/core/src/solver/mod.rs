//! Model parameters, energies and the primal-dual solvers.

mod median;
mod pdhg;

pub use median::median_filter_z;
pub use pdhg::{solve_m1, solve_m1_with, solve_pdhg, solve_pdhg_with, IterationInfo};

use serde::{Deserialize, Serialize};

use crate::diffops::{slot_of, Model};
use crate::error::{Error, Result};
use crate::par;
use crate::volume::{grouped_norm_21_raw, SplitState, Volume};

/// Tolerance used when checking that a state lies in the feasible set.
pub const FEASIBILITY_TOL: f64 = 1e-10;

/// Weights, step sizes and stopping controls of one solve.
///
/// `mu1..mu3` weight the infimal-convolution models, `nu1`/`nu2` the M1
/// destriping model; the unused group is ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub model: Model,
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub tau: f64,
    pub sigma: f64,
    pub theta: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    /// Evaluate the energy every `energy_stride` iterations (and at the last).
    pub energy_stride: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::fib()
    }
}

impl ModelParams {
    pub fn ic(mu1: f64, mu2: f64, mu3: f64) -> Self {
        ModelParams {
            model: Model::Ic,
            mu1,
            mu2,
            mu3,
            nu1: 0.0,
            nu2: 0.0,
            tau: 0.2,
            sigma: 0.2,
            theta: 1.0,
            max_iters: 1000,
            rel_tol: 1e-6,
            energy_stride: 1,
        }
    }

    /// 3D-TV variant; `mu2` is unused.
    pub fn icrev(mu1: f64, mu3: f64) -> Self {
        ModelParams {
            model: Model::IcRev,
            mu2: 0.0,
            ..Self::ic(mu1, 0.0, mu3)
        }
    }

    pub fn m1(nu1: f64, nu2: f64) -> Self {
        ModelParams {
            model: Model::M1,
            nu1,
            nu2,
            ..Self::ic(0.0, 0.0, 0.0)
        }
    }

    /// Weights used for FIB tomography volumes: `(1/300, 2/300, 6/300)`.
    pub fn fib() -> Self {
        Self::ic(1.0 / 300.0, 2.0 / 300.0, 6.0 / 300.0)
    }

    /// Weights used for 2D MODIS destriping: `(0.5, 1, 4)`.
    pub fn modis() -> Self {
        Self::ic(0.5, 1.0, 4.0)
    }

    /// Weight of each block row of `K`, in block order.
    pub fn block_weights(&self) -> Vec<f64> {
        match self.model {
            Model::Ic => vec![self.mu1, self.mu2, 1.0, self.mu3],
            Model::IcRev => vec![self.mu1, 1.0, self.mu3],
            Model::M1 => vec![self.nu1, self.nu2],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let weights: [(&'static str, f64); 5] = [
            ("mu1", self.mu1),
            ("mu2", self.mu2),
            ("mu3", self.mu3),
            ("nu1", self.nu1),
            ("nu2", self.nu2),
        ];
        for (name, w) in weights {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::param(name, format!("must be finite and >= 0, got {w}")));
            }
        }
        for (name, v) in [("tau", self.tau), ("sigma", self.sigma)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::param("theta", format!("must lie in (0, 1], got {}", self.theta)));
        }
        if self.max_iters == 0 {
            return Err(Error::param("max_iters", "must be at least 1"));
        }
        if !(self.rel_tol >= 0.0) {
            return Err(Error::param("rel_tol", format!("must be >= 0, got {}", self.rel_tol)));
        }
        if self.energy_stride == 0 {
            return Err(Error::param("energy_stride", "must be at least 1"));
        }
        let bound = self.model.norm_bound();
        let product = self.tau * self.sigma;
        if product * bound >= 1.0 {
            return Err(Error::StepSize {
                product,
                norm_bound: bound,
                limit: 1.0 / bound,
            });
        }
        Ok(())
    }
}

/// Per-run diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Energy after each evaluated iteration (every iteration for stride 1).
    pub energy_trace: Vec<f64>,
    /// `‖x_{k+1} - x_k‖ / ‖x_k‖` of the last iteration.
    pub final_rel_change: f64,
    pub converged: bool,
    pub energy_stride: usize,
    pub wall_time_secs: f64,
}

impl SolveReport {
    pub fn final_energy(&self) -> Option<f64> {
        self.energy_trace.last().copied()
    }
}

/// Checks `u + s + l = f` and `0 <= u <= 1` within [`FEASIBILITY_TOL`].
pub fn check_feasible(x: &SplitState, f: &Volume) -> Result<()> {
    let residual = x.max_constraint_residual(f)?;
    if residual > FEASIBILITY_TOL {
        return Err(Error::Infeasible(format!("max |u + s + l - f| = {residual:.3e}")));
    }
    let range = x.max_range_violation();
    if range > FEASIBILITY_TOL {
        return Err(Error::Infeasible(format!("u leaves [0, 1] by {range:.3e}")));
    }
    Ok(())
}

/// Objective value of `x` for `params.model`.
///
/// For the infimal-convolution models `x` must be feasible (otherwise the
/// indicator term is infinite and an error is returned). For M1 only `x.u`
/// is read and the value is `½‖f - u‖² + ν₁‖∇_y(f - u)‖₁ + ν₂‖∇_{x,z}u‖_{2,1}`.
pub fn energy(x: &SplitState, f: &Volume, params: &ModelParams) -> Result<f64> {
    x.dims().check_same(&f.dims())?;
    let model = params.model;
    if model != Model::M1 {
        check_feasible(x, f)?;
    }
    let n = f.dims().len();
    let mut total = 0.0;
    for (&(slot, op), w) in model.blocks().iter().zip(params.block_weights()) {
        let mut k = op.apply(slot_of(x, slot));
        if model == Model::M1 && slot == crate::diffops::Slot::U && op == crate::DiffOperator::GradY {
            // ‖∇_y(f - u)‖ = ‖∇_y u - ∇_y f‖
            let kf = op.apply(f);
            k.as_mut_slice()
                .iter_mut()
                .zip(kf.as_slice())
                .for_each(|(a, b)| *a -= b);
        }
        total += w * grouped_norm_21_raw(k.as_slice(), n, k.channels());
    }
    if model == Model::M1 {
        total += 0.5 * squared_distance(x.u.as_slice(), f.as_slice());
    }
    Ok(total)
}

/// [`energy`] with the model forced to IC.
pub fn energy_ic(x: &SplitState, f: &Volume, params: &ModelParams) -> Result<f64> {
    energy(x, f, &ModelParams { model: Model::Ic, ..params.clone() })
}

/// [`energy`] with the model forced to ICREV.
pub fn energy_icrev(x: &SplitState, f: &Volume, params: &ModelParams) -> Result<f64> {
    energy(x, f, &ModelParams { model: Model::IcRev, ..params.clone() })
}

/// M1 objective of a single image `u` against data `f`.
pub fn m1_objective(u: &Volume, f: &Volume, nu1: f64, nu2: f64) -> Result<f64> {
    let x = SplitState::new(u.clone(), Volume::zeros(u.dims()), Volume::zeros(u.dims()))?;
    energy(&x, f, &ModelParams::m1(nu1, nu2))
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    par::sum_blocks(a.len(), |r| {
        a[r.clone()]
            .iter()
            .zip(&b[r])
            .map(|(x, y)| (x - y) * (x - y))
            .sum()
    })
}

/// Moves per-slice constants from `l` to `s`: `(u, s + m_k, l - m_k)`.
///
/// `shifts` holds one constant per `x`-`y` slice. Neither `∇_y` nor `∇_{x,y}`
/// sees such constants, so the objective is unchanged.
pub fn gauge_shift(x: &SplitState, shifts: &[f64]) -> Result<SplitState> {
    let dims = x.dims();
    if shifts.len() != dims.nz {
        return Err(Error::DimensionMismatch {
            expected: format!("{} slice shifts", dims.nz),
            actual: format!("{}", shifts.len()),
        });
    }
    let sl = dims.slice_len();
    let mut s = x.s.clone();
    let mut l = x.l.clone();
    par::for_each_chunk_mut2(s.as_mut_slice(), l.as_mut_slice(), sl, |k, cs, cl| {
        let m = shifts[k];
        cs.iter_mut().for_each(|v| *v += m);
        cl.iter_mut().for_each(|v| *v -= m);
    });
    Ok(SplitState { u: x.u.clone(), s, l })
}
