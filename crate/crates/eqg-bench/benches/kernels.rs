//! Benchmarks for the series/tensor kernels: theta brackets, scalar factors,
//! the Yang-Baxter residual, the RLL assembly and spin-1 fusion.

use criterion::{criterion_group, criterion_main, Criterion};
use eqg::evalrep::{rll_residual, EvaluationRep};
use eqg::params::default_params;
use eqg::qseries::{theta_product_fast, BracketCtx};
use eqg::rmatrix::{dybe_residual, fuse_r, r_matrix, rho_plus, Gauge};
use eqg::scalar::Cx;
use eqg::TruncationPolicy;
use std::hint::black_box;

fn bench_kernels(c: &mut Criterion) {
    let params = default_params();
    let pol = TruncationPolicy::default();
    let ctx = BracketCtx::new(params, pol).unwrap();

    c.bench_function("theta_product_n40", |b| {
        b.iter(|| theta_product_fast(black_box(Cx::new(0.62, 0.21)), params.p, 50))
    });

    c.bench_function("bracket_eval", |b| {
        b.iter(|| ctx.eval(black_box(Cx::new(0.45, 0.23)), false))
    });

    c.bench_function("rho_plus", |b| {
        b.iter(|| rho_plus(black_box(Cx::new(0.41, 0.17)), &params, false, pol).unwrap())
    });

    c.bench_function("r_matrix_4x4", |b| {
        b.iter(|| {
            r_matrix(
                black_box(Cx::new(0.41, 0.17)),
                Cx::new(0.92, 0.21),
                &params,
                false,
                pol,
            )
            .unwrap()
        })
    });

    c.bench_function("dybe_residual", |b| {
        b.iter(|| {
            dybe_residual(
                black_box(Cx::new(0.31, 0.12)),
                Cx::new(-0.22, 0.19),
                Cx::new(0.52, 0.08),
                Cx::new(1.05, 0.22),
                &params,
                false,
                pol,
            )
            .unwrap()
        })
    });

    let rep1 = EvaluationRep::new(1, Cx::new(0.05, 0.18), params).unwrap();
    let rep2 = EvaluationRep::new(1, Cx::new(-0.22, 0.11), params).unwrap();
    c.bench_function("rll_residual_spin_half_pair", |b| {
        b.iter(|| {
            rll_residual(
                black_box(Cx::new(0.34, 0.21)),
                Cx::new(-0.18, 0.14),
                &rep1,
                &rep2,
                Cx::new(0.97, 0.24),
                pol,
            )
            .unwrap()
        })
    });

    c.bench_function("fuse_spin1", |b| {
        b.iter(|| {
            fuse_r(
                2,
                black_box(Cx::new(0.43, 0.21)),
                Cx::new(1.05, 0.27),
                &params,
                false,
                pol,
                Gauge::RepL,
            )
            .unwrap()
        })
    });
}

criterion_group! {
    name = kernels;
    config = Criterion::default().sample_size(20);
    targets = bench_kernels
}
criterion_main!(kernels);
