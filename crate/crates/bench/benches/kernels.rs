use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rfcollapse::flow::{integrate_warped_surface, stable_dt, WarpedSurfaceMetric};
use rfcollapse::gh::{gh_brute_force, gh_upper_bound, random_space, EpsGrid};
use rfcollapse::metric::{geodesic_distances, sample_circle, sample_warped_torus};

fn bumpy(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 2.0 + (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos())
        .collect()
}

fn geodesics(c: &mut Criterion) {
    let mut group = c.benchmark_group("geodesic_distances");
    for n in [16usize, 32, 64] {
        let sample = sample_warped_torus(&bumpy(n), 0.5, n).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n * n), &sample, |b, s| {
            b.iter(|| geodesic_distances(black_box(s), 0).unwrap())
        });
    }
    group.finish();
}

fn gh(c: &mut Criterion) {
    let grid = EpsGrid::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut group = c.benchmark_group("gh_brute_force");
    for n in [3usize, 4, 5] {
        let x = random_space(&mut rng, n);
        let y = random_space(&mut rng, n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &(x, y), |b, (x, y)| {
            b.iter(|| gh_brute_force(black_box(x), black_box(y), &grid).unwrap())
        });
    }
    group.finish();

    let x = sample_circle(6.0, 64).unwrap();
    let y = sample_circle(6.5, 64).unwrap();
    c.bench_function("gh_upper_bound/circles_64", |b| {
        b.iter(|| gh_upper_bound(black_box(&x), black_box(&y), 500, 0).unwrap())
    });
}

fn warped_flow(c: &mut Criterion) {
    let mut group = c.benchmark_group("integrate_warped_surface");
    group.sample_size(10);
    for n in [64usize, 256] {
        let m0 = WarpedSurfaceMetric::from_fn(n, 1.0, |r| 2.0 + r.cos()).unwrap();
        let dt = stable_dt(&m0);
        group.bench_with_input(BenchmarkId::new("t_0.1", n), &m0, |b, m| {
            b.iter(|| integrate_warped_surface(black_box(m), 0.1, dt).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, geodesics, gh, warped_flow);
criterion_main!(benches);
