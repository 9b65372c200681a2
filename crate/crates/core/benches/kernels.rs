//! Hot kernels on one thread versus the global pool.
//!
//! Build with `--no-default-features` to measure the sequential fallback.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use decurtain_core::diffops::{apply_k, apply_k_adjoint};
use decurtain_core::metrics::ssim;
use decurtain_core::par;
use decurtain_core::prox::{coupled_shrink, project_c, Threshold};
use decurtain_core::{generate_phantom, solve_pdhg, Dims, Model, ModelParams, PhantomSpec, SplitState};

fn thread_counts() -> Vec<usize> {
    let all = par::current_threads();
    if all > 1 {
        vec![1, all]
    } else {
        vec![1]
    }
}

fn kernels(c: &mut Criterion) {
    let dims = Dims::cube(64).unwrap();
    let ph = generate_phantom(&PhantomSpec::hard_edge().with_dims(dims)).unwrap();
    let f = ph.corrupted;
    let x = SplitState::new(f.clone(), ph.stripes.clone(), ph.laminar.clone()).unwrap();
    let k = apply_k(&x, Model::Ic);
    let grad = k.blocks[3].clone();

    let mut g = c.benchmark_group("kernels_64");
    for t in thread_counts() {
        g.bench_with_input(BenchmarkId::new("apply_k_ic", t), &t, |b, &t| {
            b.iter(|| par::with_threads(t, || apply_k(&x, Model::Ic)))
        });
        g.bench_with_input(BenchmarkId::new("apply_k_adjoint_ic", t), &t, |b, &t| {
            b.iter(|| par::with_threads(t, || apply_k_adjoint(&k).unwrap()))
        });
        g.bench_with_input(BenchmarkId::new("coupled_shrink", t), &t, |b, &t| {
            b.iter(|| par::with_threads(t, || coupled_shrink(&grad, Threshold::new(0.05).unwrap())))
        });
        g.bench_with_input(BenchmarkId::new("project_c", t), &t, |b, &t| {
            b.iter(|| par::with_threads(t, || project_c(&x.u, &x.s, &x.l, &f).unwrap()))
        });
        g.bench_with_input(BenchmarkId::new("ssim", t), &t, |b, &t| {
            b.iter(|| par::with_threads(t, || ssim(&ph.clean, &f).unwrap()))
        });
    }
    g.finish();
}

fn solver(c: &mut Criterion) {
    let dims = Dims::cube(32).unwrap();
    let f = generate_phantom(&PhantomSpec::hard_edge().with_dims(dims)).unwrap().corrupted;
    let mut p = ModelParams::fib();
    p.max_iters = 20;
    p.rel_tol = 0.0;
    let mut g = c.benchmark_group("pdhg_32_20iters");
    g.sample_size(10);
    for t in thread_counts() {
        g.bench_with_input(BenchmarkId::new("ic", t), &t, |b, &t| {
            b.iter(|| par::with_threads(t, || solve_pdhg(&f, &p).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, kernels, solver);
criterion_main!(benches);
