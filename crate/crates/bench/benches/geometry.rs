use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndf::geom::{chamfer_l2, sample_surface, seeded_rng, uniform_in_box, unit_box, Point, Surface, TriMesh};

fn queries(n: usize) -> Vec<Point<3>> {
    let mut rng = seeded_rng(1);
    (0..n).map(|_| uniform_in_box(&unit_box(), &mut rng)).collect()
}

fn closest_point(c: &mut Criterion) {
    let qs = queries(1000);
    let mut group = c.benchmark_group("closest_point");
    for sub in [2, 4] {
        let mesh = TriMesh::icosphere(Point::<3>::zeros(), 0.3, sub);
        group.bench_with_input(BenchmarkId::new("icosphere", mesh.faces().len()), &mesh, |b, m| {
            b.iter(|| qs.iter().map(|q| m.closest(black_box(q)).unwrap().distance).sum::<f64>())
        });
    }
    group.finish();
}

fn chamfer(c: &mut Criterion) {
    let mesh = TriMesh::half_sphere(Point::<3>::zeros(), 0.4, 24, 48);
    let a = sample_surface(&mesh, 10_000, 1).unwrap().points;
    let b = sample_surface(&mesh, 10_000, 2).unwrap().points;
    c.bench_function("chamfer_l2_10k", |bch| bch.iter(|| chamfer_l2(black_box(&a), black_box(&b)).unwrap()));
}

criterion_group!(benches, closest_point, chamfer);
criterion_main!(benches);
