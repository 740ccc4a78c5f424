use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use viscobeam::beam1d::{energy_gradient_hessian, ForceProfile};
use viscobeam::dimred::{build_recovery, phi_h};
use viscobeam::flow::{incremental_step, NewtonSettings};
use viscobeam::MaterialModel;
use viscobeam_bench::{datum, flow_space, gamma_row_geometry, svk_forms};

fn assembly(c: &mut Criterion) {
    let forms = svk_forms();
    let force = ForceProfile::zero();
    let mut group = c.benchmark_group("energy_assembly");
    for n in [16, 32, 64] {
        let s = datum(n, 1.0, 0.1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &s, |b, s| {
            b.iter(|| energy_gradient_hessian(black_box(s), &forms.w, &force).unwrap())
        });
    }
    group.finish();
}

fn flow_step(c: &mut Criterion) {
    let settings = NewtonSettings::default();
    let mut group = c.benchmark_group("flow_step");
    for r in [0.0, 1.0] {
        let s = datum(32, r, 0.1);
        let space = flow_space(&s);
        let x = space.coords(&s).unwrap();
        group.bench_with_input(BenchmarkId::new("r", r), &x, |b, x| {
            b.iter(|| incremental_step(&space, black_box(x), 0.01, &settings, None).unwrap())
        });
    }
    group.finish();
}

fn gamma_row(c: &mut Criterion) {
    let model = MaterialModel::svk(1.0);
    let force = ForceProfile::zero();
    let s = datum(16, 1.0, 0.5);
    let (geom, sizes) = gamma_row_geometry();
    c.bench_function("gamma_row_energy", |b| {
        b.iter(|| {
            let y = build_recovery(black_box(&s), &geom, sizes).unwrap();
            phi_h(&y, &model, &force).unwrap()
        })
    });
}

criterion_group!(benches, assembly, flow_step, gamma_row);
criterion_main!(benches);
