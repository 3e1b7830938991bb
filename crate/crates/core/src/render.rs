//! Reference volume renderer.
//!
//! Every voxel is the normalized weighted average of Gaussian amplitudes,
//! `I(p) = Σ A_i w_i(p) / Σ w_i(p)`, with
//! `w_i(p) = exp(-½ (p-μ_i)ᵀ Σ_i⁻¹ (p-μ_i)) · r_i`. Weights beyond
//! `cutoff_sigma` Mahalanobis units are exactly zero, and voxels whose total
//! weight falls below `epsilon_w` render as zero. This path loops over all
//! Gaussians for every voxel and serves as the oracle for the brick
//! rasterizer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::field::{assemble_covariance, GaussianField};
use crate::linalg::{pack_sym, Vec3};
use crate::real::Real;
use crate::volume::{GridSpec, Volume};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderOptions {
    /// Mahalanobis truncation radius; `f64::INFINITY` (JSON `null`)
    /// disables truncation.
    #[serde(with = "cutoff_serde")]
    pub cutoff_sigma: f64,
    /// Voxels with total weight below this render as zero.
    pub epsilon_w: f64,
    pub precision: Precision,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            cutoff_sigma: 3.0,
            epsilon_w: 1e-8,
            precision: Precision::F32,
        }
    }
}

pub(crate) mod cutoff_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl RenderOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.cutoff_sigma > 0.0) {
            return Err(Error::Config(format!("cutoff_sigma must be > 0, got {}", self.cutoff_sigma)));
        }
        if !(self.epsilon_w > 0.0) {
            return Err(Error::Config(format!("epsilon_w must be > 0, got {}", self.epsilon_w)));
        }
        Ok(())
    }

    pub fn cutoff_sq(&self) -> f64 {
        self.cutoff_sigma * self.cutoff_sigma
    }
}

/// Activated, render-ready parameters of one Gaussian.
#[derive(Debug, Clone, Copy)]
pub struct Kernel<T> {
    pub mu: [T; 3],
    /// Packed `Σ⁻¹` as `[xx, yy, zz, xy, xz, yz]`.
    pub inv: [T; 6],
    pub amp: T,
    pub relax: T,
}

impl<T: Real> Kernel<T> {
    #[inline(always)]
    pub fn offset(&self, p: [T; 3]) -> [T; 3] {
        [p[0] - self.mu[0], p[1] - self.mu[1], p[2] - self.mu[2]]
    }

    /// Squared Mahalanobis distance for an offset `d = p - μ`.
    #[inline(always)]
    pub fn mahalanobis_sq(&self, d: [T; 3]) -> T {
        let m = &self.inv;
        let two = T::one() + T::one();
        d[0] * (m[0] * d[0] + two * (m[3] * d[1] + m[4] * d[2]))
            + d[1] * (m[1] * d[1] + two * m[5] * d[2])
            + m[2] * d[2] * d[2]
    }

    /// `Σ⁻¹ d`.
    #[inline(always)]
    pub fn inv_times(&self, d: [T; 3]) -> [T; 3] {
        let m = &self.inv;
        [
            m[0] * d[0] + m[3] * d[1] + m[4] * d[2],
            m[3] * d[0] + m[1] * d[1] + m[5] * d[2],
            m[4] * d[0] + m[5] * d[1] + m[2] * d[2],
        ]
    }

    /// Truncated weight `w(p)`.
    #[inline(always)]
    pub fn weight(&self, p: [T; 3], cutoff_sq: T) -> T {
        let d2 = self.mahalanobis_sq(self.offset(p));
        if d2 <= cutoff_sq {
            (T::from_f64(-0.5) * d2).exp() * self.relax
        } else {
            T::zero()
        }
    }
}

/// Activates every Gaussian of `f` into scalar type `T`.
pub fn prepare_kernels<T: Real>(f: &GaussianField) -> Result<Vec<Kernel<T>>> {
    (0..f.len())
        .map(|i| {
            let (_, inv) = assemble_covariance(&f.covariance_factors(i))?;
            Ok(Kernel {
                mu: f.positions()[i].map(T::from_f64),
                inv: pack_sym(&inv).map(T::from_f64),
                amp: T::from_f64(f.amplitude(i)),
                relax: T::from_f64(f.relax(i)),
            })
        })
        .collect()
}

#[inline(always)]
pub(crate) fn world_point<T: Real>(grid: &GridSpec, ijk: [usize; 3]) -> [T; 3] {
    grid.world(ijk).map(T::from_f64)
}

/// Weight of Gaussian `i` of `f` at world point `p`, evaluated in `f64`.
pub fn weight(f: &GaussianField, i: usize, p: Vec3, opts: &RenderOptions) -> Result<f64> {
    let (_, inv) = assemble_covariance(&f.covariance_factors(i))?;
    let k = Kernel {
        mu: f.positions()[i],
        inv: pack_sym(&inv),
        amp: f.amplitude(i),
        relax: f.relax(i),
    };
    Ok(k.weight(p, opts.cutoff_sq()))
}

/// Brute-force render in precision `T`, returning voxel values in x-fastest
/// order.
pub fn render_naive_values<T: Real>(
    f: &GaussianField,
    grid: &GridSpec,
    opts: &RenderOptions,
    exec: &Executor,
) -> Result<Vec<T>> {
    opts.validate()?;
    let kernels = prepare_kernels::<T>(f)?;
    let cutoff_sq = T::from_f64(opts.cutoff_sq());
    let eps = T::from_f64(opts.epsilon_w);
    let [nx, ny, nz] = grid.dims;
    let slices = exec.map(nz, |k| {
        let mut out = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let p = world_point::<T>(grid, [i, j, k]);
                let mut s = T::zero();
                let mut w_sum = T::zero();
                for g in &kernels {
                    let d2 = g.mahalanobis_sq(g.offset(p));
                    if d2 <= cutoff_sq {
                        let w = (T::from_f64(-0.5) * d2).exp() * g.relax;
                        s += g.amp * w;
                        w_sum += w;
                    }
                }
                out.push(if w_sum >= eps { s / w_sum } else { T::zero() });
            }
        }
        out
    });
    Ok(slices.into_iter().flatten().collect())
}

/// Brute-force render at the precision selected in `opts`.
pub fn render_naive(f: &GaussianField, grid: &GridSpec, opts: &RenderOptions, exec: &Executor) -> Result<Volume> {
    let data = match opts.precision {
        Precision::F32 => render_naive_values::<f32>(f, grid, opts, exec)?,
        Precision::F64 => render_naive_values::<f64>(f, grid, opts, exec)?
            .into_iter()
            .map(|x| x as f32)
            .collect(),
    };
    Volume::new(grid.clone(), data)
}
