use super::RasterOptions;
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::field::{assemble_covariance, GaussianField};
use crate::volume::GridSpec;

/// Inclusive `[lo, hi]` per axis.
type Ranges = [[i64; 2]; 3];

/// Slack on the ellipsoid bounding box so reduced-precision Mahalanobis
/// evaluations right at the cutoff still fall inside the recorded range.
const EXTENT_SLACK: f64 = 1e-5;

/// Gaussian-to-brick binning for one `(field, grid, options)` triple.
#[derive(Debug, Clone)]
pub struct BrickIndex {
    brick_dims: [usize; 3],
    brick_grid: [usize; 3],
    lists: Vec<Vec<u32>>,
    /// Inclusive voxel-index ranges `[lo, hi]` per axis covered by each
    /// Gaussian's cutoff box, clamped to the grid; `lo > hi` means empty.
    voxel_ranges: Vec<[[i64; 2]; 3]>,
    grid: GridSpec,
    cutoff_sigma: f64,
    generation: u64,
}

impl BrickIndex {
    pub fn build(f: &GaussianField, grid: &GridSpec, opts: &RasterOptions, exec: &Executor) -> Result<Self> {
        opts.validate()?;
        grid.validate()?;
        let bd = opts.brick_dims;
        let brick_grid = [0, 1, 2].map(|a| grid.dims[a].div_ceil(bd[a]));
        let cutoff = opts.render.cutoff_sigma;

        let per_gaussian: Vec<Result<(Ranges, Ranges)>> = exec.map(f.len(), |i| {
            let (sigma, _) = assemble_covariance(&f.covariance_factors(i))?;
            let mu = f.positions()[i];
            let mut voxels = [[0i64; 2]; 3];
            let mut bricks = [[0i64; 2]; 3];
            for a in 0..3 {
                let half = cutoff * sigma[a][a].sqrt() * (1.0 + EXTENT_SLACK);
                let n = grid.dims[a] as f64;
                // Continuous voxel coordinates of the ellipsoid's bounding box.
                let u_lo = (mu[a] - half - grid.origin[a]) / grid.spacing[a];
                let u_hi = (mu[a] + half - grid.origin[a]) / grid.spacing[a];
                voxels[a] = [
                    u_lo.ceil().clamp(0.0, n) as i64,
                    u_hi.floor().clamp(-1.0, n - 1.0) as i64,
                ];
                // Brick b spans voxel coordinates [b·bd - ½, (b+1)·bd - ½].
                let nb = brick_grid[a] as f64;
                let b = bd[a] as f64;
                if u_hi < -0.5 || u_lo > n - 0.5 {
                    bricks[a] = [0, -1];
                } else {
                    bricks[a] = [
                        ((u_lo + 0.5) / b - 1.0).ceil().clamp(0.0, nb - 1.0) as i64,
                        ((u_hi + 0.5) / b).floor().clamp(0.0, nb - 1.0) as i64,
                    ];
                }
            }
            Ok((voxels, bricks))
        });

        let mut lists = vec![Vec::new(); brick_grid.iter().product()];
        let mut voxel_ranges = Vec::with_capacity(f.len());
        for (i, r) in per_gaussian.into_iter().enumerate() {
            let (voxels, bricks) = r?;
            voxel_ranges.push(voxels);
            for bz in bricks[2][0]..=bricks[2][1] {
                for by in bricks[1][0]..=bricks[1][1] {
                    for bx in bricks[0][0]..=bricks[0][1] {
                        let b = bx as usize + brick_grid[0] * (by as usize + brick_grid[1] * bz as usize);
                        lists[b].push(i as u32);
                    }
                }
            }
        }
        Ok(BrickIndex {
            brick_dims: bd,
            brick_grid,
            lists,
            voxel_ranges,
            grid: grid.clone(),
            cutoff_sigma: cutoff,
            generation: f.generation(),
        })
    }

    pub fn brick_dims(&self) -> [usize; 3] {
        self.brick_dims
    }

    pub fn brick_grid(&self) -> [usize; 3] {
        self.brick_grid
    }

    pub fn brick_count(&self) -> usize {
        self.lists.len()
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn list(&self, brick: usize) -> &[u32] {
        &self.lists[brick]
    }

    pub fn lists(&self) -> &[Vec<u32>] {
        &self.lists
    }

    /// Total number of (brick, Gaussian) pairs.
    pub fn pair_count(&self) -> usize {
        self.lists.iter().map(Vec::len).sum()
    }

    /// Reorders every brick list (used to exercise order independence).
    pub fn permute_lists(&mut self, mut permute: impl FnMut(&mut Vec<u32>)) {
        for l in &mut self.lists {
            permute(l);
        }
    }

    pub(crate) fn voxel_range(&self, gaussian: usize) -> &[[i64; 2]; 3] {
        &self.voxel_ranges[gaussian]
    }

    /// Half-open voxel index range `[lo, hi)` of brick `b`.
    pub fn brick_voxels(&self, b: usize) -> ([usize; 3], [usize; 3]) {
        let bx = b % self.brick_grid[0];
        let by = (b / self.brick_grid[0]) % self.brick_grid[1];
        let bz = b / (self.brick_grid[0] * self.brick_grid[1]);
        let c = [bx, by, bz];
        let lo = [0, 1, 2].map(|a| c[a] * self.brick_dims[a]);
        let hi = [0, 1, 2].map(|a| ((c[a] + 1) * self.brick_dims[a]).min(self.grid.dims[a]));
        (lo, hi)
    }

    pub(crate) fn check(&self, f: &GaussianField, grid: &GridSpec, opts: &RasterOptions) -> Result<()> {
        if self.generation != f.generation() || self.voxel_ranges.len() != f.len() {
            return Err(Error::StaleIndex {
                index: self.generation,
                field: f.generation(),
            });
        }
        if &self.grid != grid {
            return Err(Error::GridMismatch("brick index was built for a different grid".into()));
        }
        if self.brick_dims != opts.brick_dims || self.cutoff_sigma != opts.render.cutoff_sigma {
            return Err(Error::Config("brick index was built with different options; rebuild brick index".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldFlags;

    fn field(centers: Vec<[f64; 3]>, sigma: f64) -> GaussianField {
        let n = centers.len();
        GaussianField::new(
            centers,
            vec![[sigma.ln(); 3]; n],
            vec![[1.0, 0.0, 0.0, 0.0]; n],
            vec![0.0; n],
            vec![0.0; n],
            FieldFlags::default(),
        )
        .unwrap()
    }

    fn bricks_of(idx: &BrickIndex, g: u32) -> Vec<usize> {
        (0..idx.brick_count()).filter(|&b| idx.list(b).contains(&g)).collect()
    }

    #[test]
    fn tiny_gaussian_lands_in_one_brick() {
        let grid = GridSpec::unit([16, 16, 8]);
        let f = field(vec![[3.0, 4.0, 1.5]], 0.1);
        let idx = BrickIndex::build(&f, &grid, &RasterOptions::default(), &Executor::serial()).unwrap();
        assert_eq!(idx.brick_grid(), [2, 2, 2]);
        assert_eq!(bricks_of(&idx, 0), vec![0]);
    }

    #[test]
    fn huge_gaussian_lands_everywhere() {
        let grid = GridSpec::unit([20, 12, 9]);
        let f = field(vec![[10.0, 6.0, 4.0]], 20.0);
        let idx = BrickIndex::build(&f, &grid, &RasterOptions::default(), &Executor::serial()).unwrap();
        assert_eq!(bricks_of(&idx, 0).len(), idx.brick_count());
        assert_eq!(idx.brick_count(), 3 * 2 * 3);
    }

    #[test]
    fn shared_face_lands_in_both() {
        // Bricks 0 and 1 along x meet at voxel coordinate 7.5.
        let grid = GridSpec::unit([16, 8, 4]);
        let f = field(vec![[7.5, 3.5, 1.5]], 0.1);
        let idx = BrickIndex::build(&f, &grid, &RasterOptions::default(), &Executor::serial()).unwrap();
        assert_eq!(bricks_of(&idx, 0), vec![0, 1]);
    }

    #[test]
    fn far_away_gaussian_is_not_binned() {
        let grid = GridSpec::unit([8, 8, 4]);
        let f = field(vec![[100.0, 0.0, 0.0]], 1.0);
        let idx = BrickIndex::build(&f, &grid, &RasterOptions::default(), &Executor::serial()).unwrap();
        assert_eq!(idx.pair_count(), 0);
    }

    #[test]
    fn bricks_tile_the_grid_exactly_once() {
        let grid = GridSpec::unit([13, 9, 7]);
        let f = field(vec![[0.0; 3]], 1.0);
        let idx = BrickIndex::build(&f, &grid, &RasterOptions::default(), &Executor::serial()).unwrap();
        let mut hits = vec![0u8; grid.voxel_count()];
        for b in 0..idx.brick_count() {
            let (lo, hi) = idx.brick_voxels(b);
            for k in lo[2]..hi[2] {
                for j in lo[1]..hi[1] {
                    for i in lo[0]..hi[0] {
                        hits[grid.linear_index([i, j, k])] += 1;
                    }
                }
            }
        }
        assert!(hits.iter().all(|&h| h == 1));
    }

    #[test]
    fn stale_index_is_detected() {
        let grid = GridSpec::unit([8, 8, 4]);
        let mut f = field(vec![[1.0; 3]], 1.0);
        let opts = RasterOptions::default();
        let idx = BrickIndex::build(&f, &grid, &opts, &Executor::serial()).unwrap();
        assert!(idx.check(&f, &grid, &opts).is_ok());
        f.params_mut().positions[0][0] = 2.0;
        let e = idx.check(&f, &grid, &opts).unwrap_err();
        assert!(e.to_string().contains("rebuild brick index"));
    }
}
