//! Analytic backward pass.
//!
//! With `I = S / W` cached per voxel and upstream gradient `g = ∂L/∂I`:
//!
//! * `∂L/∂A_i = Σ_p g · w_i / W`
//! * `∂L/∂θ_i = Σ_p g · (A_i − I) / W · ∂w_i/∂θ_i` for `θ ∈ {μ, Σ⁻¹, r}`,
//!   where `∂w/∂μ = w Σ⁻¹ d`, `∂w/∂Σ⁻¹ = −½ w d dᵀ` and `∂w/∂r = exp(−½ d²)`.
//!
//! The `Σ⁻¹` gradient is chained to log-scales and the (normalized)
//! quaternion once per Gaussian after all bricks are merged.

use super::forward::{for_each_voxel, ordered_list, RenderCache};
use super::{BrickIndex, RasterOptions};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::field::GaussianField;
use crate::linalg::{frobenius_dot, mat_mul, quat_norm, quat_to_mat, quat_to_mat_jacobian, transpose, unpack_sym, Vec3};
use crate::real::Real;
use crate::render::{prepare_kernels, world_point};
use crate::volume::GridSpec;

/// Gradients with respect to the stored (pre-activation) parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBuffer {
    pub position: Vec<Vec3>,
    pub log_scale: Vec<Vec3>,
    pub rotation: Vec<[f64; 4]>,
    pub raw_amplitude: Vec<f64>,
    pub raw_relax: Vec<f64>,
}

impl GradientBuffer {
    pub fn zeros(n: usize) -> Self {
        GradientBuffer {
            position: vec![[0.0; 3]; n],
            log_scale: vec![[0.0; 3]; n],
            rotation: vec![[0.0; 4]; n],
            raw_amplitude: vec![0.0; n],
            raw_relax: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.position.len()
    }

    pub fn is_empty(&self) -> bool {
        self.position.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().flatten().all(|x| x.is_finite())
            && self.log_scale.iter().flatten().all(|x| x.is_finite())
            && self.rotation.iter().flatten().all(|x| x.is_finite())
            && self.raw_amplitude.iter().all(|x| x.is_finite())
            && self.raw_relax.iter().all(|x| x.is_finite())
    }

    /// True when every entry has the same bit pattern.
    pub fn bit_eq(&self, other: &GradientBuffer) -> bool {
        fn bits<'a>(it: impl Iterator<Item = &'a f64>) -> Vec<u64> {
            it.map(|x| x.to_bits()).collect()
        }
        bits(self.position.iter().flatten()) == bits(other.position.iter().flatten())
            && bits(self.log_scale.iter().flatten()) == bits(other.log_scale.iter().flatten())
            && bits(self.rotation.iter().flatten()) == bits(other.rotation.iter().flatten())
            && bits(self.raw_amplitude.iter()) == bits(other.raw_amplitude.iter())
            && bits(self.raw_relax.iter()) == bits(other.raw_relax.iter())
    }
}

/// Gradient with respect to the activated quantities of one Gaussian,
/// before chaining through activations and the covariance factorization.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RawGrad {
    /// `∂L/∂A`.
    pub amp: f64,
    /// `∂L/∂r`.
    pub relax: f64,
    /// `∂L/∂μ`.
    pub mu: Vec3,
    /// `∂L/∂Σ⁻¹`, packed `[xx, yy, zz, xy, xz, yz]` (full-matrix entries).
    pub inv: [f64; 6],
}

impl RawGrad {
    #[inline]
    pub fn add(&mut self, o: &RawGrad) {
        self.amp += o.amp;
        self.relax += o.relax;
        for a in 0..3 {
            self.mu[a] += o.mu[a];
        }
        for a in 0..6 {
            self.inv[a] += o.inv[a];
        }
    }
}

/// Contributions of one brick, keyed by Gaussian id.
#[derive(Debug, Clone, PartialEq)]
pub struct BrickPartial {
    pub brick: usize,
    pub entries: Vec<(u32, RawGrad)>,
}

/// Sums per-brick partials in ascending brick order into one dense buffer
/// of `n` Gaussians. The input order does not affect the result.
pub fn merge_gradients(n: usize, mut partials: Vec<BrickPartial>) -> Vec<RawGrad> {
    partials.sort_by_key(|p| p.brick);
    let mut out = vec![RawGrad::default(); n];
    for p in &partials {
        for (id, g) in &p.entries {
            out[*id as usize].add(g);
        }
    }
    out
}

fn validate_inputs<T: Real>(
    f: &GaussianField,
    grid: &GridSpec,
    idx: &BrickIndex,
    cache: &RenderCache<T>,
    dl_di: &[f64],
    opts: &RasterOptions,
) -> Result<()> {
    idx.check(f, grid, opts)?;
    if cache.generation() != f.generation() || cache.grid() != grid {
        return Err(Error::Config("render cache does not belong to this field and grid".into()));
    }
    if dl_di.len() != grid.voxel_count() {
        return Err(Error::DataLength {
            expected: grid.voxel_count(),
            got: dl_di.len(),
        });
    }
    if let Some(voxel) = dl_di.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient { voxel });
    }
    Ok(())
}

/// Accumulates brick `b`'s contribution for each Gaussian in its list and
/// hands `(id, grad)` to `emit`.
fn brick_pass<T: Real>(
    b: usize,
    kernels: &[crate::render::Kernel<T>],
    grid: &GridSpec,
    idx: &BrickIndex,
    cache: &RenderCache<T>,
    dl_di: &[f64],
    opts: &RasterOptions,
    mut emit: impl FnMut(u32, RawGrad),
) {
    let (lo, hi) = idx.brick_voxels(b);
    let cutoff_sq = T::from_f64(opts.render.cutoff_sq());
    let eps = T::from_f64(opts.render.epsilon_w);
    let half = T::from_f64(-0.5);
    for &g in ordered_list(idx, b, opts).iter() {
        let kern = &kernels[g as usize];
        let amp = kern.amp.as_f64();
        let relax = kern.relax;
        let mut acc = RawGrad::default();
        let mut touched = false;
        for_each_voxel(idx, lo, hi, g as usize, |ijk| {
            let v = grid.linear_index(ijk);
            let w_sum = cache.w[v];
            let up = dl_di[v];
            if w_sum < eps || up == 0.0 {
                return;
            }
            let d = kern.offset(world_point::<T>(grid, ijk));
            let d2 = kern.mahalanobis_sq(d);
            if d2 > cutoff_sq {
                return;
            }
            let k = (half * d2).exp();
            let w = (k * relax).as_f64();
            let scale = up / w_sum.as_f64();
            let common = scale * (amp - cache.i[v].as_f64());
            acc.amp += scale * w;
            acc.relax += common * k.as_f64();
            let t = common * w;
            let sd = kern.inv_times(d);
            let d = d.map(|x| x.as_f64());
            for a in 0..3 {
                acc.mu[a] += t * sd[a].as_f64();
            }
            let h = -0.5 * t;
            acc.inv[0] += h * d[0] * d[0];
            acc.inv[1] += h * d[1] * d[1];
            acc.inv[2] += h * d[2] * d[2];
            acc.inv[3] += h * d[0] * d[1];
            acc.inv[4] += h * d[0] * d[2];
            acc.inv[5] += h * d[1] * d[2];
            touched = true;
        });
        if touched {
            emit(g, acc);
        }
    }
}

pub(super) fn partials<T: Real>(
    f: &GaussianField,
    grid: &GridSpec,
    idx: &BrickIndex,
    cache: &RenderCache<T>,
    dl_di: &[f64],
    opts: &RasterOptions,
    exec: &Executor,
) -> Result<Vec<BrickPartial>> {
    validate_inputs(f, grid, idx, cache, dl_di, opts)?;
    let kernels = prepare_kernels::<T>(f)?;
    Ok(exec.map(idx.brick_count(), |b| {
        let mut entries = Vec::new();
        brick_pass(b, &kernels, grid, idx, cache, dl_di, opts, |g, acc| entries.push((g, acc)));
        BrickPartial { brick: b, entries }
    }))
}

pub(super) fn backward<T: Real>(
    f: &GaussianField,
    grid: &GridSpec,
    idx: &BrickIndex,
    cache: &RenderCache<T>,
    dl_di: &[f64],
    opts: &RasterOptions,
    exec: &Executor,
) -> Result<GradientBuffer> {
    let raw = if opts.deterministic || exec.is_serial() {
        merge_gradients(f.len(), partials(f, grid, idx, cache, dl_di, opts, exec)?)
    } else {
        validate_inputs(f, grid, idx, cache, dl_di, opts)?;
        let kernels = prepare_kernels::<T>(f)?;
        let n = f.len();
        exec.fold_reduce(
            idx.brick_count(),
            || vec![RawGrad::default(); n],
            |mut acc, b| {
                brick_pass(b, &kernels, grid, idx, cache, dl_di, opts, |g, r| acc[g as usize].add(&r));
                acc
            },
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| x.add(y));
                a
            },
        )
    };
    Ok(finalize(f, &raw, exec))
}

/// Chains `∂L/∂Σ⁻¹` (full symmetric matrix `g`) to the log-scales and the
/// raw quaternion `q` (normalized inside the covariance assembly).
pub fn covariance_factor_grads(log_scale: &Vec3, q: &[f64; 4], g: &[f64; 6]) -> (Vec3, [f64; 4]) {
    let g = unpack_sym(g);
    let norm = quat_norm(q);
    let qn = q.map(|c| c / norm);
    let r = quat_to_mat(&qn);
    let d = log_scale.map(|ls| (-2.0 * ls).exp());

    // Σ⁻¹ = R D Rᵀ with D = diag(exp(−2 ls)).
    let rtgr = mat_mul(&mat_mul(&transpose(&r), &g), &r);
    let dls = [0, 1, 2].map(|k| -2.0 * d[k] * rtgr[k][k]);

    // ∂L/∂R = 2 G R D for symmetric G.
    let gr = mat_mul(&g, &r);
    let mut dr = [[0.0; 3]; 3];
    for i in 0..3 {
        for k in 0..3 {
            dr[i][k] = 2.0 * gr[i][k] * d[k];
        }
    }
    let jac = quat_to_mat_jacobian(&qn);
    let dqn = [0, 1, 2, 3].map(|c| frobenius_dot(&dr, &jac[c]));
    // Through q̂ = q / |q|.
    let dot = (0..4).map(|c| qn[c] * dqn[c]).sum::<f64>();
    let dq = [0, 1, 2, 3].map(|c| (dqn[c] - qn[c] * dot) / norm);
    (dls, dq)
}

fn finalize(f: &GaussianField, raw: &[RawGrad], exec: &Executor) -> GradientBuffer {
    let flags = f.flags();
    let per: Vec<_> = exec.map(f.len(), |i| {
        let r = &raw[i];
        let mut d_relax = r.relax;
        let d_raw_a = if flags.amplitude_enabled {
            let a = f.amplitude(i);
            r.amp * a * (1.0 - a)
        } else {
            if flags.relax_enabled {
                // The amplitude is the relaxation proxy itself.
                d_relax += r.amp;
            }
            0.0
        };
        let d_raw_r = if flags.relax_enabled {
            let rr = f.relax(i);
            d_relax * rr * (1.0 - rr)
        } else {
            0.0
        };
        let (dls, dq) = covariance_factor_grads(&f.log_scales()[i], &f.rotations()[i], &r.inv);
        (r.mu, dls, dq, d_raw_a, d_raw_r)
    });
    let mut out = GradientBuffer::zeros(f.len());
    for (i, (mu, dls, dq, a, r)) in per.into_iter().enumerate() {
        out.position[i] = mu;
        out.log_scale[i] = dls;
        out.rotation[i] = dq;
        out.raw_amplitude[i] = a;
        out.raw_relax[i] = r;
    }
    out
}
