mod common;

use common::*;
use decurtain_core::prox::{coupled_shrink, project_voxel, Threshold};
use decurtain_core::solver::{energy, m1_objective, median_filter_z};
use decurtain_core::{solve_m1, solve_pdhg, Dims, ModelParams, StackedField};
use rand::Rng;

fn tight(mut p: ModelParams, iters: usize) -> ModelParams {
    p.max_iters = iters;
    p.rel_tol = 1e-13;
    p.energy_stride = iters;
    p
}

#[test]
fn projection_matches_closed_form_oracle() {
    let mut r = rng(21);
    for _ in 0..10_000 {
        let (a, b, c) = (r.gen_range(-2.0..3.0), r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0));
        let f = r.gen_range(0.0..1.0);
        let got = project_voxel(a, b, c, f);
        let want = oracle_project(a, b, c, f);
        assert!((got.0 - want.0).abs() <= 1e-12);
        assert!((got.1 - want.1).abs() <= 1e-12);
        assert!((got.2 - want.2).abs() <= 1e-12);
    }
}

#[test]
fn coupled_shrink_is_radial_minimizer() {
    let mut r = rng(22);
    let d = Dims::new(50, 1, 1).unwrap();
    for ch in 1..=3 {
        let data: Vec<f64> = (0..ch * d.len()).map(|_| r.gen_range(-2.0..2.0)).collect();
        let w = StackedField::from_vec(d, ch, data).unwrap();
        let lambda = 0.7;
        let out = coupled_shrink(&w, Threshold::new(lambda).unwrap());
        for i in 0..d.len() {
            let norm: f64 = (0..ch).map(|c| w.channel(c)[i].powi(2)).sum::<f64>().sqrt();
            let t = bisect_min(0.0, norm, |t| t - norm + lambda);
            for c in 0..ch {
                let want = t * w.channel(c)[i] / norm;
                assert!((out.channel(c)[i] - want).abs() <= 1e-7);
            }
        }
    }
}

#[test]
fn pdhg_reaches_admm_optimum_ic_and_icrev() {
    let d = Dims::cube(4).unwrap();
    for seed in 0..3 {
        let mut r = rng(100 + seed);
        let f = random_volume(d, &mut r, 0.0, 1.0);
        for params in [ModelParams::ic(0.05, 0.1, 0.3), ModelParams::icrev(0.05, 0.3)] {
            let oracle = admm_ic(&f, params.model, &params.block_weights(), 1.0, 20_000, 1e-11);
            let (x, _) = solve_pdhg(&f, &tight(params.clone(), 20_000)).unwrap();
            let e = energy(&x, &f, &params).unwrap();
            let eo = energy(&state_from_dense(&oracle.x, d), &f, &params).unwrap();
            assert!((e - eo).abs() <= 1e-4, "{}: pdhg {e} admm {eo}", params.model);
        }
    }
}

#[test]
fn m1_reaches_admm_optimum() {
    let d = Dims::cube(4).unwrap();
    let mut r = rng(31);
    let f = random_volume(d, &mut r, 0.0, 1.0);
    let (nu1, nu2) = (0.2, 0.1);
    let g = median_filter_z(&f, 3).unwrap();
    let oracle = admm_m1(&g, nu1, nu2, 1.0, 20_000, 1e-11);
    let mut p = tight(ModelParams::m1(nu1, nu2), 20_000);
    p.rel_tol = 1e-14;
    let (u, _) = decurtain_core::solver::solve_m1_with(&f, &p, 3, |_| {}).unwrap();
    let e = m1_objective(&u, &g, nu1, nu2).unwrap();
    assert!((e - oracle.energy).abs() <= 1e-6, "{e} vs {}", oracle.energy);
    // without regularization the data comes back unchanged
    assert_eq!(solve_m1(&f, 0.0, 0.0, 1).unwrap(), f);
}
