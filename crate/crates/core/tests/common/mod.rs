//! Reference implementations shared by the integration and acceptance tests.
//!
//! Everything here is written against dense matrices or plain loops so it
//! shares no code with the library kernels.

#![allow(dead_code)]

use decurtain_core::diffops::Slot;
use decurtain_core::{DiffOperator, Dims, Model, SplitState, Volume};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_volume(dims: Dims, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Volume {
    let data = (0..dims.len()).map(|_| rng.gen_range(lo..hi)).collect();
    Volume::from_vec(dims, data).unwrap()
}

/// `D_m`: forward differences, last row zero.
pub fn d_m(m: usize) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(m, m);
    for r in 0..m.saturating_sub(1) {
        d[(r, r)] = -1.0;
        d[(r, r + 1)] = 1.0;
    }
    d
}

/// `D²_m`: central second differences, first and last rows zero.
pub fn d2_m(m: usize) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(m, m);
    for r in 1..m.saturating_sub(1) {
        d[(r, r - 1)] = 1.0;
        d[(r, r)] = -2.0;
        d[(r, r + 1)] = 1.0;
    }
    d
}

fn eye(m: usize) -> DMatrix<f64> {
    DMatrix::identity(m, m)
}

/// Kronecker assembly of the elementary operators for `x`-fastest storage.
pub fn dense_dx(d: Dims) -> DMatrix<f64> {
    eye(d.nz).kronecker(&eye(d.ny)).kronecker(&d_m(d.nx))
}

pub fn dense_dy(d: Dims) -> DMatrix<f64> {
    eye(d.nz).kronecker(&d_m(d.ny)).kronecker(&eye(d.nx))
}

pub fn dense_dz(d: Dims) -> DMatrix<f64> {
    d_m(d.nz).kronecker(&eye(d.ny)).kronecker(&eye(d.nx))
}

pub fn dense_dzz(d: Dims) -> DMatrix<f64> {
    d2_m(d.nz).kronecker(&eye(d.ny)).kronecker(&eye(d.nx))
}

fn vstack(parts: &[DMatrix<f64>]) -> DMatrix<f64> {
    let cols = parts[0].ncols();
    let rows: usize = parts.iter().map(|p| p.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r0 = 0;
    for p in parts {
        out.view_mut((r0, 0), (p.nrows(), cols)).copy_from(p);
        r0 += p.nrows();
    }
    out
}

pub fn dense_operator(op: DiffOperator, d: Dims) -> DMatrix<f64> {
    match op {
        DiffOperator::Dx => dense_dx(d),
        DiffOperator::Dy | DiffOperator::GradY => dense_dy(d),
        DiffOperator::Dz => dense_dz(d),
        DiffOperator::Dzz | DiffOperator::LapZ => dense_dzz(d),
        DiffOperator::GradXZ => vstack(&[dense_dx(d), dense_dz(d)]),
        DiffOperator::GradXY => vstack(&[dense_dx(d), dense_dy(d)]),
        DiffOperator::GradXYZ => vstack(&[dense_dx(d), dense_dy(d), dense_dz(d)]),
    }
}

/// Full `K` acting on `[u; s; l]`, block rows in model order.
pub fn dense_k(model: Model, d: Dims) -> DMatrix<f64> {
    let n = d.len();
    let parts: Vec<DMatrix<f64>> = model
        .blocks()
        .iter()
        .map(|&(slot, op)| {
            let a = dense_operator(op, d);
            let mut row = DMatrix::zeros(a.nrows(), 3 * n);
            let c0 = match slot {
                Slot::U => 0,
                Slot::S => n,
                Slot::L => 2 * n,
            };
            row.view_mut((0, c0), (a.nrows(), n)).copy_from(&a);
            row
        })
        .collect();
    vstack(&parts)
}

/// Group sizes and weights of each block row of `K`.
pub fn block_groups(model: Model, weights: &[f64]) -> Vec<(usize, f64)> {
    model
        .blocks()
        .iter()
        .zip(weights)
        .map(|(&(_, op), &w)| (op.channels(), w))
        .collect()
}

/// `Σ_b w_b ‖(Kx)_b‖_{2,1}` from a dense product.
pub fn dense_objective(kx: &DVector<f64>, n: usize, groups: &[(usize, f64)]) -> f64 {
    let mut off = 0;
    let mut total = 0.0;
    for &(ch, w) in groups {
        for i in 0..n {
            let sq: f64 = (0..ch).map(|c| kx[off + c * n + i].powi(2)).sum();
            total += w * sq.sqrt();
        }
        off += ch * n;
    }
    total
}

/// Group shrinkage on a block-stacked vector.
fn shrink_groups(v: &DVector<f64>, n: usize, groups: &[(usize, f64)], scale: f64) -> DVector<f64> {
    let mut out = v.clone();
    let mut off = 0;
    for &(ch, w) in groups {
        let lam = w * scale;
        for i in 0..n {
            let norm: f64 = (0..ch).map(|c| v[off + c * n + i].powi(2)).sum::<f64>().sqrt();
            let k = if norm > lam { 1.0 - lam / norm } else { 0.0 };
            for c in 0..ch {
                out[off + c * n + i] = v[off + c * n + i] * k;
            }
        }
        off += ch * n;
    }
    out
}

/// Projection onto `{u + s + l = f, 0 <= u <= 1}` by eliminating `(s, l)`:
/// the optimal `u` minimizes `(u - a)² + ((b + c) - (f - u))² / 2`.
pub fn oracle_project(a: f64, b: f64, c: f64, f: f64) -> (f64, f64, f64) {
    let u = ((2.0 * a - b - c + f) / 3.0).clamp(0.0, 1.0);
    let s = (b - c + f - u) / 2.0;
    (u, s, f - u - s)
}

pub struct AdmmResult {
    pub x: DVector<f64>,
    pub energy: f64,
    pub iterations: usize,
}

/// ADMM on `min Σ w_b‖(Kx)_b‖ + ι_C(x)` with splitting `z = Kx`, `v = x`.
///
/// The `x`-step solves `(KᵀK + I) x = Kᵀ(z - p) + (v - q)` by Cholesky.
pub fn admm_ic(f: &Volume, model: Model, weights: &[f64], rho: f64, max_iters: usize, tol: f64) -> AdmmResult {
    let d = f.dims();
    let n = d.len();
    let k = dense_k(model, d);
    let groups = block_groups(model, weights);
    let chol = (k.transpose() * &k + DMatrix::identity(3 * n, 3 * n))
        .cholesky()
        .expect("KᵀK + I is positive definite");
    let fv = f.as_slice();
    let mut x = DVector::zeros(3 * n);
    for i in 0..n {
        x[i] = fv[i];
    }
    let mut z = &k * &x;
    let mut v = x.clone();
    let mut p = DVector::zeros(k.nrows());
    let mut q = DVector::zeros(3 * n);
    let mut it = 0;
    while it < max_iters {
        it += 1;
        let rhs = k.transpose() * (&z - &p) + (&v - &q);
        x = chol.solve(&rhs);
        let kx = &k * &x;
        let z_new = shrink_groups(&(&kx + &p), n, &groups, 1.0 / rho);
        let mut v_new = &x + &q;
        for i in 0..n {
            let (u, s, l) = oracle_project(v_new[i], v_new[n + i], v_new[2 * n + i], fv[i]);
            v_new[i] = u;
            v_new[n + i] = s;
            v_new[2 * n + i] = l;
        }
        p += &kx - &z_new;
        q += &x - &v_new;
        let primal = (&kx - &z_new).norm() + (&x - &v_new).norm();
        let dual = rho * ((&z_new - &z).norm() + (&v_new - &v).norm());
        z = z_new;
        v = v_new;
        if primal < tol && dual < tol {
            break;
        }
    }
    let energy = dense_objective(&(&k * &v), n, &groups);
    AdmmResult { x: v, energy, iterations: it }
}

/// ADMM for `min ½‖u - g‖² + ν₁‖∇_y u - ∇_y g‖₁ + ν₂‖∇_{x,z}u‖_{2,1}`.
pub fn admm_m1(g: &Volume, nu1: f64, nu2: f64, rho: f64, max_iters: usize, tol: f64) -> AdmmResult {
    let d = g.dims();
    let n = d.len();
    let k = vstack(&[dense_dy(d), dense_dx(d), dense_dz(d)]);
    let groups = [(1, nu1), (2, nu2)];
    let gv = DVector::from_column_slice(g.as_slice());
    let mut offset = DVector::zeros(3 * n);
    offset.rows_mut(0, n).copy_from(&(dense_dy(d) * &gv));
    let chol = (DMatrix::identity(n, n) + rho * k.transpose() * &k)
        .cholesky()
        .expect("I + ρKᵀK is positive definite");
    let mut u = gv.clone();
    let mut z = &k * &u - &offset;
    let mut p = DVector::zeros(3 * n);
    let mut it = 0;
    while it < max_iters {
        it += 1;
        u = chol.solve(&(&gv + rho * k.transpose() * (&z + &offset - &p)));
        let r = &k * &u - &offset;
        let z_new = shrink_groups(&(&r + &p), n, &groups, 1.0 / rho);
        p += &r - &z_new;
        let primal = (&r - &z_new).norm();
        let dual = rho * (&z_new - &z).norm();
        z = z_new;
        if primal < tol && dual < tol {
            break;
        }
    }
    let r = &k * &u - &offset;
    let energy = 0.5 * (&u - &gv).norm_squared() + dense_objective(&r, n, &groups);
    AdmmResult { x: u, energy, iterations: it }
}

pub fn state_from_dense(x: &DVector<f64>, d: Dims) -> SplitState {
    let n = d.len();
    let part = |o: usize| Volume::from_vec(d, x.rows(o, n).iter().copied().collect()).unwrap();
    SplitState::new(part(0), part(n), part(2 * n)).unwrap()
}

/// Minimizer on `[lo, hi]` of a convex function given its derivative,
/// by bisection on the sign of `dphi`.
pub fn bisect_min(mut lo: f64, mut hi: f64, dphi: impl Fn(f64) -> f64) -> f64 {
    if dphi(lo) >= 0.0 {
        return lo;
    }
    if dphi(hi) <= 0.0 {
        return hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if dphi(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Pearson correlation.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}
