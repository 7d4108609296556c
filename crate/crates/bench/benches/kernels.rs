use std::f64::consts::PI;
use std::hint::black_box;

use arsub_core::lame::lame_solve;
use arsub_core::subsolution::membership_from_parts;
use arsub_core::{lambda_max, Grid, SymMatrix};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn smooth(g: &Grid, phase: f64) -> arsub_core::ScalarField {
    g.sample(|x| (0.5 * (PI * x[0] + phase).sin() + 0.3 * (PI * x[x.len() - 1]).cos()).exp())
}

fn spectral(c: &mut Criterion) {
    let mut group = c.benchmark_group("spectral");
    for (d, n) in [(2, 64), (2, 256), (3, 32)] {
        let g = Grid::new(d, n).unwrap();
        let f = smooth(&g, 0.0);
        let id = format!("d{d}n{n}");
        group.bench_with_input(BenchmarkId::new("grad", &id), &f, |b, f| b.iter(|| g.grad(black_box(f))));
        let rhs = g.laplacian(&f);
        group.bench_with_input(BenchmarkId::new("poisson", &id), &rhs, |b, r| b.iter(|| g.poisson_solve(black_box(r)).unwrap()));
        let m = g.grad(&f).add(&g.sample_vector(|x| vec![(PI * x[1]).sin(); d]));
        group.bench_with_input(BenchmarkId::new("helmholtz", &id), &m, |b, m| b.iter(|| g.helmholtz(black_box(m))));
        let div_free = g.helmholtz(&m).solenoidal;
        group.bench_with_input(BenchmarkId::new("lame_solve", &id), &div_free, |b, v| b.iter(|| lame_solve(&g, black_box(v)).unwrap()));
    }
    group.finish();
}

fn pointwise(c: &mut Criterion) {
    let m2 = SymMatrix::from_rows(&[&[1.0, 0.3], &[0.3, -0.5]]);
    let m3 = SymMatrix::from_rows(&[&[1.0, 0.3, -0.2], &[0.3, -0.5, 0.7], &[-0.2, 0.7, 0.1]]);
    c.bench_function("lambda_max/d2", |b| b.iter(|| lambda_max(black_box(&m2))));
    c.bench_function("lambda_max/d3", |b| b.iter(|| lambda_max(black_box(&m3))));

    let g = Grid::new(2, 64).unwrap();
    let kinetic: Vec<_> = (0..33).map(|k| smooth(&g, k as f64 * 0.1)).collect();
    let potential: Vec<_> = (0..33).map(|k| smooth(&g, 1.0 - k as f64 * 0.1).scale(0.1)).collect();
    let times: Vec<f64> = (0..33).map(|k| k as f64 / 32.0).collect();
    let lambda = vec![10.0; 33];
    let kr: Vec<_> = kinetic.iter().collect();
    let pr: Vec<_> = potential.iter().collect();
    c.bench_function("membership/d2n64nt33", |b| b.iter(|| membership_from_parts(&times, &kr, &pr, black_box(&lambda), 0.0)));
}

criterion_group!(benches, spectral, pointwise);
criterion_main!(benches);
