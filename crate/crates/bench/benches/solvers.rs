use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use homlab::volume_cell::{assemble_volume_problem, solve_volume_cell};
use homlab::{
    estimate_ghom, sample_medium, CutOptions, GeneratorKind, Neighborhood, Rational,
    RationalDirection, SubadditiveProcessSpec, SurfaceFamily, VolumeIntegrand,
};
use ndarray::arr2;

fn surface_spec(nu: &RationalDirection, neighborhood: Neighborhood) -> SubadditiveProcessSpec {
    SubadditiveProcessSpec::new(
        vec![1.0],
        nu,
        SurfaceFamily::Perimeter,
        GeneratorKind::iid_cells(1.0, 3.0, 0.5),
        7,
        CutOptions {
            neighborhood,
            ..Default::default()
        },
    )
    .unwrap()
}

fn min_cut(c: &mut Criterion) {
    let mut group = c.benchmark_group("surface_cell");
    let tilted = RationalDirection::new(vec![3, 4], 5).unwrap();
    for (name, nu, nb) in [
        ("n4_axis", RationalDirection::axis(2, 1), Neighborhood::N4),
        ("n4_tilted", tilted.clone(), Neighborhood::N4),
        ("n8_tilted", tilted, Neighborhood::n8()),
    ] {
        let spec = surface_spec(&nu, nb);
        for t in [32u32, 64] {
            group.bench_with_input(BenchmarkId::new(name, t), &t, |b, &t| {
                b.iter(|| estimate_ghom(black_box(&spec), &[t], 1).unwrap())
            });
        }
    }
    group.finish();
}

fn volume_cg(c: &mut Criterion) {
    let mut group = c.benchmark_group("volume_cell");
    group.sample_size(10);
    let field = sample_medium(GeneratorKind::iid_cells(1.0, 4.0, 0.5), 7).unwrap();
    let zero = Rational::from_integer(0);
    for (p, t) in [(2.0, 8i64), (2.0, 16), (3.0, 8)] {
        let f = VolumeIntegrand::new(field.clone(), p).unwrap();
        let xi = arr2(&[[1.0, 0.0]]);
        let pb = assemble_volume_problem(
            &f,
            xi.view(),
            &[zero, zero],
            Rational::from_integer(t),
            Rational::new(1, 4),
        )
        .unwrap();
        group.bench_function(BenchmarkId::new(format!("p{p}"), t), |b| {
            b.iter(|| solve_volume_cell(black_box(&pb), 1e-10, 50_000).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, min_cut, volume_cg);
criterion_main!(benches);
