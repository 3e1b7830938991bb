//! Brick-based, order-independent rasterizer.
//!
//! The target grid is partitioned into bricks (8×8×4 voxels by default).
//! Each Gaussian is binned into every brick its cutoff ellipsoid's bounding
//! box touches, then bricks are rendered independently: the normalized
//! blend is a commutative sum, so no depth sorting is needed. The forward
//! pass caches the per-voxel numerator `S = Σ A_i w_i` and denominator
//! `W = Σ w_i`; the backward pass reuses them so each brick only revisits its
//! own Gaussian list.
//!
//! Gradients are accumulated into per-brick partial buffers and merged in
//! ascending brick order, which makes results bit-identical for any worker
//! count. [`RasterOptions::deterministic`] = false switches to per-worker
//! dense accumulators, which is faster but not reproducible.

mod backward;
mod forward;
mod index;

pub use backward::{covariance_factor_grads, merge_gradients, BrickPartial, GradientBuffer, RawGrad};
pub use forward::RenderCache;
pub use index::BrickIndex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::field::GaussianField;
use crate::real::Real;
use crate::render::{Precision, RenderOptions};
use crate::volume::{GridSpec, Volume};

pub const DEFAULT_BRICK_DIMS: [usize; 3] = [8, 8, 4];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RasterOptions {
    pub render: RenderOptions,
    pub brick_dims: [usize; 3],
    /// Fixed-order gradient reduction (bit-reproducible).
    pub deterministic: bool,
}

impl Default for RasterOptions {
    fn default() -> Self {
        RasterOptions {
            render: RenderOptions::default(),
            brick_dims: DEFAULT_BRICK_DIMS,
            deterministic: true,
        }
    }
}

impl RasterOptions {
    pub fn validate(&self) -> Result<()> {
        self.render.validate()?;
        if self.brick_dims.contains(&0) {
            return Err(Error::Config(format!("brick dims must be >= 1, got {:?}", self.brick_dims)));
        }
        Ok(())
    }
}

/// Options plus the executor used for the per-brick work.
#[derive(Debug, Clone)]
pub struct Rasterizer {
    opts: RasterOptions,
    exec: Executor,
}

impl Rasterizer {
    pub fn new(opts: RasterOptions, exec: Executor) -> Result<Self> {
        opts.validate()?;
        Ok(Rasterizer { opts, exec })
    }

    pub fn options(&self) -> &RasterOptions {
        &self.opts
    }

    pub fn executor(&self) -> &Executor {
        &self.exec
    }

    pub fn build_index(&self, f: &GaussianField, grid: &GridSpec) -> Result<BrickIndex> {
        BrickIndex::build(f, grid, &self.opts, &self.exec)
    }

    pub fn forward<T: Real>(&self, f: &GaussianField, grid: &GridSpec, idx: &BrickIndex) -> Result<RenderCache<T>> {
        forward::forward(f, grid, idx, &self.opts, &self.exec)
    }

    pub fn backward<T: Real>(
        &self,
        f: &GaussianField,
        grid: &GridSpec,
        idx: &BrickIndex,
        cache: &RenderCache<T>,
        dl_di: &[f64],
    ) -> Result<GradientBuffer> {
        backward::backward(f, grid, idx, cache, dl_di, &self.opts, &self.exec)
    }

    /// Per-brick partial gradients without merging.
    pub fn backward_partials<T: Real>(
        &self,
        f: &GaussianField,
        grid: &GridSpec,
        idx: &BrickIndex,
        cache: &RenderCache<T>,
        dl_di: &[f64],
    ) -> Result<Vec<BrickPartial>> {
        backward::partials(f, grid, idx, cache, dl_di, &self.opts, &self.exec)
    }

    /// Bins and renders at the configured precision.
    pub fn render(&self, f: &GaussianField, grid: &GridSpec) -> Result<Volume> {
        let idx = self.build_index(f, grid)?;
        match self.opts.render.precision {
            Precision::F32 => self.forward::<f32>(f, grid, &idx)?.to_volume(),
            Precision::F64 => self.forward::<f64>(f, grid, &idx)?.to_volume(),
        }
    }
}
