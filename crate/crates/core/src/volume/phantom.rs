//! Synthetic ground-truth volumes built from ellipsoids or Gaussian blobs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{gaussian_blur, GridSpec, Volume};
use crate::linalg::{mat_vec, quat_normalize, quat_to_mat, transpose, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhantomKind {
    Ellipsoids,
    GaussianMixture,
}

/// One phantom component. For ellipsoids `axes` are semi-axes; for
/// Gaussian blobs they are per-axis standard deviations. Both are in world
/// units, expressed in the frame rotated by `rotation`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub center: Vec3,
    pub axes: Vec3,
    pub rotation: [f64; 4],
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phantom {
    pub kind: PhantomKind,
    pub primitives: Vec<Primitive>,
}

impl Primitive {
    fn local(&self, p: Vec3) -> Vec3 {
        let rt = transpose(&quat_to_mat(&quat_normalize(&self.rotation)));
        mat_vec(&rt, &[p[0] - self.center[0], p[1] - self.center[1], p[2] - self.center[2]])
    }

    /// Normalized radius: `< 1` strictly inside an ellipsoid, and the
    /// Mahalanobis distance for a Gaussian blob.
    fn radius_sq(&self, p: Vec3) -> f64 {
        let d = self.local(p);
        (0..3).map(|a| (d[a] / self.axes[a]).powi(2)).sum()
    }

    fn value(&self, kind: PhantomKind, p: Vec3) -> f64 {
        let r2 = self.radius_sq(p);
        match kind {
            PhantomKind::Ellipsoids => {
                if r2 < 1.0 {
                    self.intensity
                } else {
                    0.0
                }
            }
            PhantomKind::GaussianMixture => self.intensity * (-0.5 * r2).exp(),
        }
    }
}

fn random_rotation(rng: &mut ChaCha8Rng) -> [f64; 4] {
    // Uniform on SO(3) (Shoemake).
    let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let tau = std::f64::consts::TAU;
    [
        (1.0 - u1).sqrt() * (tau * u2).sin(),
        (1.0 - u1).sqrt() * (tau * u2).cos(),
        u1.sqrt() * (tau * u3).sin(),
        u1.sqrt() * (tau * u3).cos(),
    ]
}

impl Phantom {
    pub fn empty(kind: PhantomKind) -> Self {
        Phantom {
            kind,
            primitives: Vec::new(),
        }
    }

    /// Head-like phantom: one large ellipsoid centered in the grid with
    /// `count - 1` smaller rotated ellipsoids of varying intensity inside it.
    pub fn random_ellipsoids(grid: &GridSpec, count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = grid.bounds();
        let center = [0, 1, 2].map(|a| 0.5 * (lo[a] + hi[a]));
        let half = [0, 1, 2].map(|a| 0.5 * (hi[a] - lo[a]));
        let mut primitives = Vec::with_capacity(count);
        if count > 0 {
            primitives.push(Primitive {
                center,
                axes: half.map(|h| h * rng.gen_range(0.78..0.88)),
                rotation: [1.0, 0.0, 0.0, 0.0],
                intensity: rng.gen_range(0.25..0.4),
            });
        }
        for _ in 1..count {
            let axes = half.map(|h| h * rng.gen_range(0.12..0.35));
            let c = [0, 1, 2].map(|a| center[a] + half[a] * rng.gen_range(-0.4..0.4));
            primitives.push(Primitive {
                center: c,
                axes,
                rotation: random_rotation(&mut rng),
                intensity: rng.gen_range(0.45..1.0),
            });
        }
        Phantom {
            kind: PhantomKind::Ellipsoids,
            primitives,
        }
    }

    /// `components` anisotropic Gaussian blobs with random orientation.
    pub fn random_gaussian_mixture(grid: &GridSpec, components: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = grid.bounds();
        let primitives = (0..components)
            .map(|_| {
                let center = [0, 1, 2].map(|a| {
                    let w = hi[a] - lo[a];
                    lo[a] + w * rng.gen_range(0.2..0.8)
                });
                let axes = [0, 1, 2].map(|a| (hi[a] - lo[a]) * rng.gen_range(0.05..0.18));
                Primitive {
                    center,
                    axes,
                    rotation: random_rotation(&mut rng),
                    intensity: rng.gen_range(0.3..1.0),
                }
            })
            .collect();
        Phantom {
            kind: PhantomKind::GaussianMixture,
            primitives,
        }
    }
}

/// Rasterizes `phantom` on `grid` (maximum over overlapping primitives),
/// blurs with a Gaussian of `smooth_sigma` voxels and clamps to `[0, 1]`.
pub fn generate_phantom(phantom: &Phantom, grid: &GridSpec, smooth_sigma: f64) -> Volume {
    let raw = Volume::from_fn(grid.clone(), |ijk| {
        let p = grid.world(ijk);
        phantom
            .primitives
            .iter()
            .map(|prim| prim.value(phantom.kind, p))
            .fold(0.0f64, f64::max) as f32
    });
    let mut out = gaussian_blur(&raw, smooth_sigma);
    out.data_mut().iter_mut().for_each(|x| *x = x.clamp(0.0, 1.0));
    out
}
