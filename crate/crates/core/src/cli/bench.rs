//! Brick rasterizer versus brute-force forward timing.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::exec::Executor;
use crate::field::{logit, FieldFlags, GaussianField};
use crate::raster::{RasterOptions, Rasterizer};
use crate::render::{render_naive_values, RenderOptions};
use crate::volume::GridSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub gaussians: usize,
    pub dims: [usize; 3],
    pub threads: usize,
    /// Brick forward repetitions; the fastest is reported.
    pub repeats: usize,
    pub naive_repeats: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            gaussians: 50_000,
            dims: [64, 64, 64],
            threads: 8,
            repeats: 3,
            naive_repeats: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub gaussians: usize,
    pub dims: [usize; 3],
    pub threads: usize,
    pub pairs: usize,
    pub index_seconds: f64,
    pub brick_forward_seconds: f64,
    pub naive_seconds: f64,
    /// Naive time over brick index build plus forward.
    pub speedup: f64,
    pub max_abs_diff: f64,
}

/// Uniformly scattered Gaussians with standard deviations of half a voxel
/// to one and a half voxels, like a freshly seeded field.
pub fn bench_field(n: usize, grid: &GridSpec, seed: u64) -> GaussianField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = grid.bounds();
    let h = grid.mean_spacing();
    let mut pos = Vec::with_capacity(n);
    let mut ls = Vec::with_capacity(n);
    let mut rot = Vec::with_capacity(n);
    let mut amp = Vec::with_capacity(n);
    for _ in 0..n {
        pos.push([0, 1, 2].map(|a| rng.gen_range(lo[a]..hi[a])));
        ls.push([0, 1, 2].map(|_| (h * rng.gen_range(0.5..1.5f64)).ln()));
        rot.push([0, 1, 2, 3].map(|_| rng.gen_range(-1.0..1.0)));
        amp.push(logit(rng.gen_range(0.05..0.95)));
    }
    let mut f = GaussianField::new(pos, ls, rot, amp, vec![logit(0.9); n], FieldFlags::default())
        .expect("arrays have equal length");
    f.normalize_rotations();
    f
}

fn timed<R>(f: impl FnOnce() -> R) -> (R, f64) {
    let t = Instant::now();
    let r = f();
    (r, t.elapsed().as_secs_f64())
}

pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    let exec = Executor::with_threads(cfg.threads)?;
    let grid = GridSpec::new(cfg.dims, [1.0; 3], [0.0; 3])?;
    let field = bench_field(cfg.gaussians, &grid, cfg.seed);
    let rast = Rasterizer::new(RasterOptions::default(), exec.clone())?;

    let mut index_seconds = f64::INFINITY;
    let mut brick_forward_seconds = f64::INFINITY;
    let mut brick = Vec::new();
    let mut pairs = 0;
    for _ in 0..cfg.repeats.max(1) {
        let (idx, t_idx) = timed(|| rast.build_index(&field, &grid));
        let idx = idx?;
        let (cache, t_fwd) = timed(|| rast.forward::<f32>(&field, &grid, &idx));
        index_seconds = index_seconds.min(t_idx);
        brick_forward_seconds = brick_forward_seconds.min(t_fwd);
        pairs = idx.pair_count();
        brick = cache?.i;
    }

    let mut naive_seconds = f64::INFINITY;
    let mut naive = Vec::new();
    for _ in 0..cfg.naive_repeats.max(1) {
        let (img, t) = timed(|| render_naive_values::<f32>(&field, &grid, &RenderOptions::default(), &exec));
        naive_seconds = naive_seconds.min(t);
        naive = img?;
    }
    let max_abs_diff = brick
        .iter()
        .zip(&naive)
        .map(|(a, b)| (a - b).abs() as f64)
        .fold(0.0, f64::max);
    Ok(BenchReport {
        gaussians: cfg.gaussians,
        dims: cfg.dims,
        threads: exec.threads(),
        pairs,
        index_seconds,
        brick_forward_seconds,
        naive_seconds,
        speedup: naive_seconds / (index_seconds + brick_forward_seconds),
        max_abs_diff,
    })
}
