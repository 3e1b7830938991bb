use super::{BrickIndex, RasterOptions};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::field::GaussianField;
use crate::real::Real;
use crate::render::{prepare_kernels, world_point, Kernel};
use crate::volume::{GridSpec, Volume};

/// Per-voxel numerator `s`, denominator `w` and rendered intensity `i`
/// retained for the backward pass.
#[derive(Debug, Clone)]
pub struct RenderCache<T> {
    pub s: Vec<T>,
    pub w: Vec<T>,
    pub i: Vec<T>,
    grid: GridSpec,
    generation: u64,
}

impl<T: Real> RenderCache<T> {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn to_volume(&self) -> Result<Volume> {
        Volume::new(self.grid.clone(), self.i.iter().map(|x| x.as_f32()).collect())
    }

    pub fn intensities_f64(&self) -> Vec<f64> {
        self.i.iter().map(|x| x.as_f64()).collect()
    }
}

/// Visits the voxels of brick `b` that lie inside Gaussian `g`'s cutoff box.
#[inline(always)]
pub(super) fn for_each_voxel(
    idx: &BrickIndex,
    b_lo: [usize; 3],
    b_hi: [usize; 3],
    g: usize,
    mut visit: impl FnMut([usize; 3]),
) {
    let r = idx.voxel_range(g);
    let lo = [0, 1, 2].map(|a| (r[a][0].max(b_lo[a] as i64)) as usize);
    let hi = [0, 1, 2].map(|a| (r[a][1] + 1).min(b_hi[a] as i64).max(0) as usize);
    for k in lo[2]..hi[2] {
        for j in lo[1]..hi[1] {
            for i in lo[0]..hi[0] {
                visit([i, j, k]);
            }
        }
    }
}

/// Brick list in canonical (ascending) order when deterministic results
/// are requested.
pub(super) fn ordered_list<'a>(idx: &'a BrickIndex, b: usize, opts: &RasterOptions) -> std::borrow::Cow<'a, [u32]> {
    let list = idx.list(b);
    if opts.deterministic && !list.is_sorted() {
        let mut v = list.to_vec();
        v.sort_unstable();
        std::borrow::Cow::Owned(v)
    } else {
        std::borrow::Cow::Borrowed(list)
    }
}

pub(super) fn forward<T: Real>(
    f: &GaussianField,
    grid: &GridSpec,
    idx: &BrickIndex,
    opts: &RasterOptions,
    exec: &Executor,
) -> Result<RenderCache<T>> {
    idx.check(f, grid, opts)?;
    let kernels: Vec<Kernel<T>> = prepare_kernels(f)?;
    let cutoff_sq = T::from_f64(opts.render.cutoff_sq());
    let eps = T::from_f64(opts.render.epsilon_w);
    let half = T::from_f64(-0.5);

    let bricks = exec.map(idx.brick_count(), |b| {
        let (lo, hi) = idx.brick_voxels(b);
        let ext = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
        let n = ext[0] * ext[1] * ext[2];
        let mut s = vec![T::zero(); n];
        let mut w = vec![T::zero(); n];
        for &g in ordered_list(idx, b, opts).iter() {
            let kern = &kernels[g as usize];
            for_each_voxel(idx, lo, hi, g as usize, |ijk| {
                let d2 = kern.mahalanobis_sq(kern.offset(world_point::<T>(grid, ijk)));
                if d2 <= cutoff_sq {
                    let wi = (half * d2).exp() * kern.relax;
                    let l = (ijk[0] - lo[0]) + ext[0] * ((ijk[1] - lo[1]) + ext[1] * (ijk[2] - lo[2]));
                    s[l] += kern.amp * wi;
                    w[l] += wi;
                }
            });
        }
        (s, w)
    });

    let total = grid.voxel_count();
    let mut s_all = vec![T::zero(); total];
    let mut w_all = vec![T::zero(); total];
    let mut i_all = vec![T::zero(); total];
    for (b, (s, w)) in bricks.into_iter().enumerate() {
        let (lo, hi) = idx.brick_voxels(b);
        let mut l = 0;
        for k in lo[2]..hi[2] {
            for j in lo[1]..hi[1] {
                for i in lo[0]..hi[0] {
                    let g = grid.linear_index([i, j, k]);
                    s_all[g] = s[l];
                    w_all[g] = w[l];
                    i_all[g] = if w[l] >= eps { s[l] / w[l] } else { T::zero() };
                    l += 1;
                }
            }
        }
    }
    if i_all.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config("forward pass produced non-finite intensities".into()));
    }
    Ok(RenderCache {
        s: s_all,
        w: w_all,
        i: i_all,
        grid: grid.clone(),
        generation: f.generation(),
    })
}
