use super::{GridSpec, Volume};

/// Samples `v` at every voxel center of `target` by trilinear
/// interpolation in world coordinates. Points outside the source clamp to
/// the nearest source voxel.
pub fn resample_trilinear(v: &Volume, target: &GridSpec) -> Volume {
    let src = v.grid();
    let data = v.data();
    let [nx, ny, nz] = src.dims;
    let axis = |u: f64, n: usize| -> (usize, usize, f64) {
        let u = u.clamp(0.0, (n - 1) as f64);
        let i0 = (u.floor() as usize).min(n - 1);
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, u - i0 as f64)
    };
    Volume::from_fn(target.clone(), |ijk| {
        let u = src.continuous_index(target.world(ijk));
        let (x0, x1, tx) = axis(u[0], nx);
        let (y0, y1, ty) = axis(u[1], ny);
        let (z0, z1, tz) = axis(u[2], nz);
        let at = |i: usize, j: usize, k: usize| data[i + nx * (j + ny * k)] as f64;
        let c00 = at(x0, y0, z0) * (1.0 - tx) + at(x1, y0, z0) * tx;
        let c10 = at(x0, y1, z0) * (1.0 - tx) + at(x1, y1, z0) * tx;
        let c01 = at(x0, y0, z1) * (1.0 - tx) + at(x1, y0, z1) * tx;
        let c11 = at(x0, y1, z1) * (1.0 - tx) + at(x1, y1, z1) * tx;
        let c0 = c00 * (1.0 - ty) + c10 * ty;
        let c1 = c01 * (1.0 - ty) + c11 * ty;
        (c0 * (1.0 - tz) + c1 * tz) as f32
    })
}

/// Separable Gaussian blur with standard deviation `sigma` in voxel units.
/// Borders replicate the edge voxel. `sigma <= 0` returns a copy.
pub fn gaussian_blur(v: &Volume, sigma: f64) -> Volume {
    if !(sigma > 0.0) {
        return v.clone();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|t| (-0.5 * (t as f64 / sigma).powi(2)).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);

    let grid = v.grid().clone();
    let dims = grid.dims;
    let mut cur: Vec<f64> = v.data().iter().map(|&x| x as f64).collect();
    let mut next = vec![0.0; cur.len()];
    let strides = [1, dims[0], dims[0] * dims[1]];
    for axis in 0..3 {
        let n = dims[axis] as isize;
        let stride = strides[axis];
        for (lin, out) in next.iter_mut().enumerate() {
            let pos = ((lin / stride) % dims[axis]) as isize;
            let base = lin - pos as usize * stride;
            let mut acc = 0.0;
            for (t, &w) in kernel.iter().enumerate() {
                let q = (pos + t as isize - radius).clamp(0, n - 1) as usize;
                acc += w * cur[base + q * stride];
            }
            *out = acc;
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Volume::new(grid, cur.into_iter().map(|x| x as f32).collect()).expect("same grid")
}
