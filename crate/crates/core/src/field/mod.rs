//! The explicit Gaussian field and its parameterization.
//!
//! Each Gaussian stores 12 learnable values: a world-space center (3), a
//! covariance factored as per-axis log standard deviations (3) and a unit
//! quaternion (4), a raw amplitude (1) and a raw relaxation proxy (1). The
//! amplitude approximates local proton density; the relaxation proxy stands
//! in for the combined T1-recovery / T2-decay modulation
//! `(1 - exp(-TR/T1)) * exp(-TE/T2)`, so TR, TE, T1 and T2 are never stored.
//! Both are passed through a sigmoid, placing them in `(0, 1)`.

mod io;

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use io::{decode_field, encode_field, load_field, save_field, MAGIC};

use crate::error::{Error, Result};
use crate::linalg::{quat_norm, quat_normalize, quat_to_mat, rotate_diag, Mat3, Vec3};
use crate::volume::Volume;

pub const PARAMS_PER_GAUSSIAN: usize = 12;

/// Amplitude used when the amplitude group is disabled and there is no
/// relaxation proxy to stand in for it.
pub const FIXED_AMPLITUDE: f64 = 0.5;

static GENERATION: AtomicU64 = AtomicU64::new(1);

fn next_generation() -> u64 {
    GENERATION.fetch_add(1, Ordering::Relaxed)
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Ablation switches for the two intensity parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldFlags {
    pub amplitude_enabled: bool,
    pub relax_enabled: bool,
}

impl Default for FieldFlags {
    fn default() -> Self {
        FieldFlags {
            amplitude_enabled: true,
            relax_enabled: true,
        }
    }
}

impl FieldFlags {
    pub fn to_bits(self) -> u32 {
        self.amplitude_enabled as u32 | (self.relax_enabled as u32) << 1
    }

    pub fn from_bits(bits: u32) -> Option<Self> {
        if bits & !0b11 != 0 {
            return None;
        }
        Some(FieldFlags {
            amplitude_enabled: bits & 1 != 0,
            relax_enabled: bits & 2 != 0,
        })
    }
}

/// Covariance `Σ = R(q) diag(s²) R(q)ᵀ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceFactors {
    pub scale: Vec3,
    pub rotation: [f64; 4],
}

/// Returns `(Σ, Σ⁻¹)`. The quaternion is renormalized before use.
pub fn assemble_covariance(f: &CovarianceFactors) -> Result<(Mat3, Mat3)> {
    if let Some(&s) = f.scale.iter().find(|&&s| !(s > 1e-8)) {
        return Err(Error::DegenerateScale { scale: s });
    }
    let n = quat_norm(&f.rotation);
    if !(n > 1e-12) {
        return Err(Error::Config("zero-norm rotation quaternion".into()));
    }
    let r = quat_to_mat(&quat_normalize(&f.rotation));
    let var = f.scale.map(|s| s * s);
    let inv = var.map(|v| 1.0 / v);
    Ok((rotate_diag(&r, &var), rotate_diag(&r, &inv)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitConfig {
    /// LR voxels below this intensity do not seed a Gaussian.
    pub background_threshold: f64,
    /// Initial standard deviation as a multiple of the voxel spacing.
    pub scale_factor: f64,
    /// Initial activated relaxation proxy.
    pub relax_init: f64,
    /// Uniform position jitter, as a fraction of the voxel spacing. Zero
    /// places every Gaussian exactly at its voxel center.
    pub position_jitter: f64,
    pub seed: u64,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            background_threshold: 0.01,
            scale_factor: 0.75,
            relax_init: 0.95,
            position_jitter: 0.0,
            seed: 0,
        }
    }
}

impl InitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.background_threshold) {
            return Err(Error::Config(format!(
                "background_threshold must be in [0, 1), got {}",
                self.background_threshold
            )));
        }
        if !(self.scale_factor > 0.0) {
            return Err(Error::Config(format!("scale_factor must be > 0, got {}", self.scale_factor)));
        }
        if !(self.relax_init > 0.0 && self.relax_init < 1.0) {
            return Err(Error::Config(format!("relax_init must be in (0, 1), got {}", self.relax_init)));
        }
        if !(self.position_jitter >= 0.0) {
            return Err(Error::Config("position_jitter must be >= 0".into()));
        }
        Ok(())
    }
}

/// A set of anisotropic Gaussians stored structure-of-arrays.
///
/// Every mutable accessor stamps the field with a fresh generation number,
/// which brick indices record so that a stale index is detected.
#[derive(Debug, Clone)]
pub struct GaussianField {
    positions: Vec<Vec3>,
    log_scales: Vec<Vec3>,
    rotations: Vec<[f64; 4]>,
    raw_amplitude: Vec<f64>,
    raw_relax: Vec<f64>,
    flags: FieldFlags,
    generation: u64,
}

impl PartialEq for GaussianField {
    fn eq(&self, other: &Self) -> bool {
        self.positions == other.positions
            && self.log_scales == other.log_scales
            && self.rotations == other.rotations
            && self.raw_amplitude == other.raw_amplitude
            && self.raw_relax == other.raw_relax
            && self.flags == other.flags
    }
}

/// Mutable view of all parameter arrays.
pub struct FieldParamsMut<'a> {
    pub positions: &'a mut [Vec3],
    pub log_scales: &'a mut [Vec3],
    pub rotations: &'a mut [[f64; 4]],
    pub raw_amplitude: &'a mut [f64],
    pub raw_relax: &'a mut [f64],
}

impl GaussianField {
    pub fn new(
        positions: Vec<Vec3>,
        log_scales: Vec<Vec3>,
        rotations: Vec<[f64; 4]>,
        raw_amplitude: Vec<f64>,
        raw_relax: Vec<f64>,
        flags: FieldFlags,
    ) -> Result<Self> {
        let n = positions.len();
        if [log_scales.len(), rotations.len(), raw_amplitude.len(), raw_relax.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err(Error::Config("field parameter arrays differ in length".into()));
        }
        Ok(GaussianField {
            positions,
            log_scales,
            rotations,
            raw_amplitude,
            raw_relax,
            flags,
            generation: next_generation(),
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn flags(&self) -> FieldFlags {
        self.flags
    }

    pub fn set_flags(&mut self, flags: FieldFlags) {
        self.flags = flags;
        self.generation = next_generation();
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn log_scales(&self) -> &[Vec3] {
        &self.log_scales
    }

    pub fn rotations(&self) -> &[[f64; 4]] {
        &self.rotations
    }

    pub fn raw_amplitude(&self) -> &[f64] {
        &self.raw_amplitude
    }

    pub fn raw_relax(&self) -> &[f64] {
        &self.raw_relax
    }

    pub fn params_mut(&mut self) -> FieldParamsMut<'_> {
        self.generation = next_generation();
        FieldParamsMut {
            positions: &mut self.positions,
            log_scales: &mut self.log_scales,
            rotations: &mut self.rotations,
            raw_amplitude: &mut self.raw_amplitude,
            raw_relax: &mut self.raw_relax,
        }
    }

    /// Activated relaxation proxy `r_i`, pinned to 1 when disabled.
    #[inline]
    pub fn relax(&self, i: usize) -> f64 {
        if self.flags.relax_enabled {
            sigmoid(self.raw_relax[i])
        } else {
            1.0
        }
    }

    /// Activated amplitude `A_i`. With the amplitude group disabled the
    /// Gaussian's signal is its relaxation proxy, or [`FIXED_AMPLITUDE`]
    /// when that is disabled too.
    #[inline]
    pub fn amplitude(&self, i: usize) -> f64 {
        match (self.flags.amplitude_enabled, self.flags.relax_enabled) {
            (true, _) => sigmoid(self.raw_amplitude[i]),
            (false, true) => self.relax(i),
            (false, false) => FIXED_AMPLITUDE,
        }
    }

    pub fn scale(&self, i: usize) -> Vec3 {
        self.log_scales[i].map(f64::exp)
    }

    pub fn covariance_factors(&self, i: usize) -> CovarianceFactors {
        CovarianceFactors {
            scale: self.scale(i),
            rotation: self.rotations[i],
        }
    }

    /// Re-projects every quaternion onto the unit sphere.
    pub fn normalize_rotations(&mut self) {
        self.generation = next_generation();
        for q in &mut self.rotations {
            let n = quat_norm(q);
            if n > 0.0 {
                *q = q.map(|c| c / n);
            } else {
                *q = [1.0, 0.0, 0.0, 0.0];
            }
        }
    }
}

/// Seeds one isotropic, axis-aligned Gaussian at the center of every LR
/// voxel whose intensity reaches `cfg.background_threshold`.
pub fn init_from_volume(lr: &Volume, cfg: &InitConfig) -> Result<GaussianField> {
    cfg.validate()?;
    let grid = lr.grid();
    let log_scale = grid.spacing.map(|s| (cfg.scale_factor * s).ln());
    let raw_relax = logit(cfg.relax_init);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut positions = Vec::new();
    let mut raw_amplitude = Vec::new();
    for (n, &x) in lr.data().iter().enumerate() {
        if x < cfg.background_threshold as f32 {
            continue;
        }
        let mut p = grid.world(grid.voxel_index(n));
        if cfg.position_jitter > 0.0 {
            for a in 0..3 {
                p[a] += grid.spacing[a] * cfg.position_jitter * rng.gen_range(-0.5..0.5);
            }
        }
        positions.push(p);
        raw_amplitude.push(logit((x as f64).clamp(1e-4, 1.0 - 1e-4)));
    }
    if positions.is_empty() {
        return Err(Error::EmptyField);
    }
    let n = positions.len();
    GaussianField::new(
        positions,
        vec![log_scale; n],
        vec![[1.0, 0.0, 0.0, 0.0]; n],
        raw_amplitude,
        vec![raw_relax; n],
        FieldFlags::default(),
    )
}
