use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use gsvol::cli::bench::bench_field;
use gsvol::render::{render_naive_values, RenderOptions};
use gsvol::{Executor, GridSpec, RasterOptions, Rasterizer};

fn executors() -> Vec<(&'static str, Executor)> {
    let mut v = vec![("serial", Executor::serial())];
    if cfg!(feature = "parallel") {
        v.push(("parallel", Executor::global()));
    }
    v
}

fn forward(c: &mut Criterion) {
    let grid = GridSpec::unit([32, 32, 32]);
    let mut g = c.benchmark_group("forward_32");
    g.sample_size(10);
    for n in [1_000usize, 10_000] {
        let field = bench_field(n, &grid, 1);
        for (name, exec) in executors() {
            let rast = Rasterizer::new(RasterOptions::default(), exec.clone()).unwrap();
            g.bench_with_input(BenchmarkId::new(format!("brick_{name}"), n), &n, |b, _| {
                b.iter(|| {
                    let idx = rast.build_index(&field, &grid).unwrap();
                    rast.forward::<f32>(&field, &grid, &idx).unwrap()
                })
            });
        }
        if n <= 1_000 {
            let exec = Executor::global();
            g.bench_with_input(BenchmarkId::new("naive", n), &n, |b, _| {
                b.iter(|| render_naive_values::<f32>(&field, &grid, &RenderOptions::default(), &exec).unwrap())
            });
        }
    }
    g.finish();
}

fn backward(c: &mut Criterion) {
    let grid = GridSpec::unit([32, 32, 32]);
    let field = bench_field(10_000, &grid, 2);
    let upstream = vec![1e-3; grid.voxel_count()];
    let mut g = c.benchmark_group("backward_32");
    g.sample_size(10);
    for (name, exec) in executors() {
        for deterministic in [true, false] {
            let opts = RasterOptions {
                deterministic,
                ..Default::default()
            };
            let rast = Rasterizer::new(opts, exec.clone()).unwrap();
            let idx = rast.build_index(&field, &grid).unwrap();
            let cache = rast.forward::<f32>(&field, &grid, &idx).unwrap();
            let id = format!("{name}_{}", if deterministic { "deterministic" } else { "fast" });
            g.bench_function(id, |b| b.iter(|| rast.backward(&field, &grid, &idx, &cache, &upstream).unwrap()));
        }
    }
    g.finish();
}

criterion_group!(benches, forward, backward);
criterion_main!(benches);
