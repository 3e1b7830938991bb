use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vec3;

/// A cell-centered sampling lattice. Voxel `v` sits at world coordinate
/// `origin + v * spacing`; each voxel covers half a spacing on either side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
}

impl GridSpec {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        let grid = GridSpec {
            dims,
            spacing,
            origin,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Unit spacing, origin at zero.
    pub fn unit(dims: [usize; 3]) -> Self {
        GridSpec {
            dims,
            spacing: [1.0; 3],
            origin: [0.0; 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.contains(&0) {
            return Err(Error::InvalidGrid(format!("dims must be >= 1, got {:?}", self.dims)));
        }
        if self.spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "spacing must be finite and > 0, got {:?}",
                self.spacing
            )));
        }
        if self.origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGrid(format!("origin must be finite, got {:?}", self.origin)));
        }
        Ok(())
    }

    pub fn voxel_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn linear_index(&self, [i, j, k]: [usize; 3]) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn voxel_index(&self, linear: usize) -> [usize; 3] {
        let i = linear % self.dims[0];
        let rest = linear / self.dims[0];
        [i, rest % self.dims[1], rest / self.dims[1]]
    }

    /// World coordinate of a voxel center.
    #[inline]
    pub fn world(&self, ijk: [usize; 3]) -> Vec3 {
        [
            self.origin[0] + ijk[0] as f64 * self.spacing[0],
            self.origin[1] + ijk[1] as f64 * self.spacing[1],
            self.origin[2] + ijk[2] as f64 * self.spacing[2],
        ]
    }

    /// Continuous voxel coordinate of a world point (voxel centers are
    /// integers).
    #[inline]
    pub fn continuous_index(&self, p: Vec3) -> Vec3 {
        [
            (p[0] - self.origin[0]) / self.spacing[0],
            (p[1] - self.origin[1]) / self.spacing[1],
            (p[2] - self.origin[2]) / self.spacing[2],
        ]
    }

    /// World-space box covered by the voxels (centers ± half a spacing).
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for a in 0..3 {
            lo[a] = self.origin[a] - 0.5 * self.spacing[a];
            hi[a] = self.origin[a] + (self.dims[a] as f64 - 0.5) * self.spacing[a];
        }
        (lo, hi)
    }

    /// A grid with `dims` voxels covering the same world box as `self`.
    pub fn with_dims_same_extent(&self, dims: [usize; 3]) -> Result<Self> {
        let (lo, hi) = self.bounds();
        let mut spacing = [0.0; 3];
        let mut origin = [0.0; 3];
        for a in 0..3 {
            if dims[a] == 0 {
                return Err(Error::InvalidGrid(format!("dims must be >= 1, got {dims:?}")));
            }
            spacing[a] = (hi[a] - lo[a]) / dims[a] as f64;
            origin[a] = lo[a] + 0.5 * spacing[a];
        }
        GridSpec::new(dims, spacing, origin)
    }

    /// Integer-factor coarsening with a shared world extent. Axes that do
    /// not divide evenly are rounded up so the extent stays covered.
    pub fn downsampled(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::InvalidGrid("factor must be >= 1".into()));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let dims = self.dims.map(|d| d.div_ceil(factor));
        if self.dims.iter().all(|d| d % factor == 0) {
            let spacing = [0, 1, 2].map(|a| self.spacing[a] * factor as f64);
            let origin = [0, 1, 2].map(|a| self.origin[a] + 0.5 * (factor as f64 - 1.0) * self.spacing[a]);
            return GridSpec::new(dims, spacing, origin);
        }
        self.with_dims_same_extent(dims)
    }

    pub fn mean_spacing(&self) -> f64 {
        (self.spacing[0] + self.spacing[1] + self.spacing[2]) / 3.0
    }
}
