//! Dense scalar volumes, grid geometry, file I/O, preprocessing and
//! synthetic phantoms.

mod grid;
mod io;
pub mod nifti;
pub mod phantom;
mod resample;

pub use grid::GridSpec;
pub use io::{load_volume, save_volume, VolumeFormat};
pub use phantom::{generate_phantom, Phantom, PhantomKind, Primitive};
pub use resample::{gaussian_blur, resample_trilinear};

use crate::error::{Error, Result};

/// A dense scalar grid stored as `f32` in x-fastest order.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    grid: GridSpec,
    data: Vec<f32>,
}

impl Volume {
    pub fn new(grid: GridSpec, data: Vec<f32>) -> Result<Self> {
        if data.len() != grid.voxel_count() {
            return Err(Error::DataLength {
                expected: grid.voxel_count(),
                got: data.len(),
            });
        }
        Ok(Volume { grid, data })
    }

    pub fn filled(grid: GridSpec, value: f32) -> Self {
        let n = grid.voxel_count();
        Volume {
            grid,
            data: vec![value; n],
        }
    }

    /// Builds a volume by evaluating `f` at every voxel index.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut([usize; 3]) -> f32) -> Self {
        let [nx, ny, nz] = grid.dims;
        let mut data = Vec::with_capacity(grid.voxel_count());
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    data.push(f([i, j, k]));
                }
            }
        }
        Volume { grid, data }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, ijk: [usize; 3]) -> f32 {
        self.data[self.grid.linear_index(ijk)]
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Errors unless `other` lives on the same grid.
    pub fn check_same_grid(&self, other: &Volume) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }
}

/// Affine rescale to `[0, 1]`; a constant volume maps to all zeros.
pub fn normalize_intensity(v: &Volume) -> Volume {
    let (lo, hi) = v.min_max();
    let (lo, hi) = (lo as f64, hi as f64);
    let range = hi - lo;
    let data = if !(range > 0.0) {
        vec![0.0; v.len()]
    } else {
        v.data
            .iter()
            .map(|&x| (((x as f64) - lo) / range).clamp(0.0, 1.0) as f32)
            .collect()
    };
    Volume {
        grid: v.grid.clone(),
        data,
    }
}
