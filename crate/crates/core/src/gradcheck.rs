//! Finite-difference check of the rasterizer's analytic gradients.
//!
//! A random field is rendered on a small grid and reduced to a scalar
//! `L = Σ c_v I_v` with fixed random weights `c_v`. The brick backward pass
//! supplies `∂L/∂θ`; fourth-order central differences of `L` (steps ±h and
//! ±2h) through the f64 reference renderer supply the comparison. Truncation makes `L` discontinuous where a
//! voxel crosses the cutoff ellipsoid, so any parameter whose stencil changes
//! the set of active voxel/Gaussian pairs is skipped and counted.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::field::{FieldFlags, GaussianField};
use crate::raster::{GradientBuffer, RasterOptions, Rasterizer};
use crate::real::Real;
use crate::render::{prepare_kernels, render_naive_values, world_point, Precision, RenderOptions};
use crate::volume::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamClass {
    Amplitude,
    Relax,
    Position,
    Scale,
    Rotation,
}

impl ParamClass {
    pub const ALL: [ParamClass; 5] = [
        ParamClass::Amplitude,
        ParamClass::Relax,
        ParamClass::Position,
        ParamClass::Scale,
        ParamClass::Rotation,
    ];

    fn width(self) -> usize {
        match self {
            ParamClass::Amplitude | ParamClass::Relax => 1,
            ParamClass::Position | ParamClass::Scale => 3,
            ParamClass::Rotation => 4,
        }
    }

    fn param_mut(self, f: &mut GaussianField, i: usize, c: usize) -> &mut f64 {
        let p = f.params_mut();
        match self {
            ParamClass::Amplitude => &mut p.raw_amplitude[i],
            ParamClass::Relax => &mut p.raw_relax[i],
            ParamClass::Position => &mut p.positions[i][c],
            ParamClass::Scale => &mut p.log_scales[i][c],
            ParamClass::Rotation => &mut p.rotations[i][c],
        }
    }

    fn analytic(self, g: &GradientBuffer, i: usize, c: usize) -> f64 {
        match self {
            ParamClass::Amplitude => g.raw_amplitude[i],
            ParamClass::Relax => g.raw_relax[i],
            ParamClass::Position => g.position[i][c],
            ParamClass::Scale => g.log_scale[i][c],
            ParamClass::Rotation => g.rotation[i][c],
        }
    }
}

impl fmt::Display for ParamClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ParamClass::Amplitude => "amplitude",
            ParamClass::Relax => "relax",
            ParamClass::Position => "position",
            ParamClass::Scale => "scale",
            ParamClass::Rotation => "rotation",
        };
        f.write_str(s)
    }
}

impl FromStr for ParamClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ParamClass::ALL
            .into_iter()
            .find(|c| c.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown parameter class '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckConfig {
    pub seed: u64,
    pub gaussians: usize,
    pub dims: [usize; 3],
    pub step: f64,
    pub precision: Precision,
    pub params: Vec<ParamClass>,
    /// Gradients smaller than this in magnitude are not compared.
    pub grad_floor: f64,
    #[serde(with = "crate::render::cutoff_serde")]
    pub cutoff_sigma: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            seed: 0,
            gaussians: 20,
            dims: [8, 8, 8],
            step: 1e-3,
            precision: Precision::F64,
            params: ParamClass::ALL.to_vec(),
            grad_floor: 1e-6,
            cutoff_sigma: 3.0,
        }
    }
}

impl GradcheckConfig {
    /// Relative error allowed for the configured precision.
    pub fn tolerance(&self) -> f64 {
        match self.precision {
            Precision::F64 => 1e-4,
            Precision::F32 => 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassResult {
    pub class: ParamClass,
    pub checked: usize,
    /// Parameters whose stencil crossed a truncation boundary.
    pub skipped: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub tolerance: f64,
    pub classes: Vec<ClassResult>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.classes.iter().all(|c| c.max_rel_error <= self.tolerance)
    }
}

/// Random field whose Gaussians overlap substantially on `grid`.
pub fn random_field(n: usize, grid: &GridSpec, seed: u64) -> GaussianField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = grid.bounds();
    let h = grid.mean_spacing();
    let mut positions = Vec::with_capacity(n);
    let mut log_scales = Vec::with_capacity(n);
    let mut rotations = Vec::with_capacity(n);
    let mut amp = Vec::with_capacity(n);
    let mut relax = Vec::with_capacity(n);
    for _ in 0..n {
        positions.push([0, 1, 2].map(|a| rng.gen_range(lo[a]..hi[a])));
        log_scales.push([0, 1, 2].map(|_| (h * rng.gen_range(0.8..2.5f64)).ln()));
        rotations.push([0, 1, 2, 3].map(|_| rng.gen_range(-1.0..1.0)));
        amp.push(rng.gen_range(-2.0..2.0));
        relax.push(rng.gen_range(-1.0..2.0));
    }
    let mut f = GaussianField::new(positions, log_scales, rotations, amp, relax, FieldFlags::default())
        .expect("arrays have equal length");
    f.normalize_rotations();
    f
}

/// Per-voxel signature of what the truncation and coverage tests decided
/// for Gaussian `i`.
fn support(f: &GaussianField, i: usize, grid: &GridSpec, opts: &RenderOptions) -> Result<Vec<u8>> {
    let kernels = prepare_kernels::<f64>(f)?;
    let cutoff_sq = opts.cutoff_sq();
    Ok((0..grid.voxel_count())
        .map(|v| {
            let p = world_point::<f64>(grid, grid.voxel_index(v));
            let mine = kernels[i].mahalanobis_sq(kernels[i].offset(p)) <= cutoff_sq;
            let w: f64 = kernels.iter().map(|k| k.weight(p, cutoff_sq)).sum();
            mine as u8 | ((w >= opts.epsilon_w) as u8) << 1
        })
        .collect())
}

fn objective(f: &GaussianField, grid: &GridSpec, c: &[f64], opts: &RenderOptions, exec: &Executor) -> Result<f64> {
    let img = render_naive_values::<f64>(f, grid, opts, exec)?;
    Ok(img.iter().zip(c).map(|(i, c)| i * c).sum())
}

fn analytic<T: Real>(rast: &Rasterizer, f: &GaussianField, grid: &GridSpec, c: &[f64]) -> Result<GradientBuffer> {
    let idx = rast.build_index(f, grid)?;
    let cache = rast.forward::<T>(f, grid, &idx)?;
    rast.backward(f, grid, &idx, &cache, c)
}

pub fn run_gradcheck(cfg: &GradcheckConfig, exec: &Executor) -> Result<GradcheckReport> {
    if cfg.gaussians == 0 || !(cfg.step > 0.0) {
        return Err(Error::Config("gradcheck needs at least one Gaussian and a positive step".into()));
    }
    let grid = GridSpec::new(cfg.dims, [1.0; 3], [0.0; 3])?;
    let field = random_field(cfg.gaussians, &grid, cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let c: Vec<f64> = (0..grid.voxel_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let render = RenderOptions {
        cutoff_sigma: cfg.cutoff_sigma,
        precision: cfg.precision,
        ..Default::default()
    };
    let rast = Rasterizer::new(
        RasterOptions {
            render,
            ..Default::default()
        },
        exec.clone(),
    )?;
    let grads = match cfg.precision {
        Precision::F32 => analytic::<f32>(&rast, &field, &grid, &c)?,
        Precision::F64 => analytic::<f64>(&rast, &field, &grid, &c)?,
    };
    let fd_opts = RenderOptions {
        precision: Precision::F64,
        ..render
    };
    let truncated = cfg.cutoff_sigma.is_finite();

    let mut classes = Vec::new();
    for &class in &cfg.params {
        let mut res = ClassResult {
            class,
            checked: 0,
            skipped: 0,
            max_rel_error: 0.0,
        };
        for i in 0..field.len() {
            let base = if truncated { Some(support(&field, i, &grid, &fd_opts)?) } else { None };
            for comp in 0..class.width() {
                let mut samples = [0.0; 4];
                let mut crosses = false;
                for (k, off) in [cfg.step, -cfg.step, 2.0 * cfg.step, -2.0 * cfg.step].into_iter().enumerate() {
                    let mut f = field.clone();
                    *class.param_mut(&mut f, i, comp) += off;
                    if let Some(base) = &base {
                        crosses |= support(&f, i, &grid, &fd_opts)? != *base;
                    }
                    samples[k] = objective(&f, &grid, &c, &fd_opts, exec)?;
                }
                if crosses {
                    res.skipped += 1;
                    continue;
                }
                let numeric = (8.0 * (samples[0] - samples[1]) - (samples[2] - samples[3])) / (12.0 * cfg.step);
                let a = class.analytic(&grads, i, comp);
                let scale = a.abs().max(numeric.abs());
                if scale <= cfg.grad_floor {
                    continue;
                }
                res.checked += 1;
                res.max_rel_error = res.max_rel_error.max((a - numeric).abs() / scale);
            }
        }
        classes.push(res);
    }
    Ok(GradcheckReport {
        tolerance: cfg.tolerance(),
        classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes() {
        let rep = run_gradcheck(&GradcheckConfig::default(), &Executor::serial()).unwrap();
        for c in &rep.classes {
            assert!(c.checked > 0, "{c:?}");
        }
        assert!(rep.passed(), "{rep:#?}");
    }

    #[test]
    fn untruncated_suite_checks_everything() {
        let cfg = GradcheckConfig {
            cutoff_sigma: f64::INFINITY,
            gaussians: 8,
            seed: 3,
            ..Default::default()
        };
        let rep = run_gradcheck(&cfg, &Executor::serial()).unwrap();
        assert!(rep.classes.iter().all(|c| c.skipped == 0));
        assert!(rep.passed(), "{rep:#?}");
    }

    #[test]
    fn f32_meets_looser_tolerance() {
        let cfg = GradcheckConfig {
            precision: Precision::F32,
            ..Default::default()
        };
        let rep = run_gradcheck(&cfg, &Executor::serial()).unwrap();
        assert_eq!(rep.tolerance, 1e-2);
        assert!(rep.passed(), "{rep:#?}");
    }

    #[test]
    fn class_filter() {
        let cfg = GradcheckConfig {
            params: vec![ParamClass::Amplitude],
            ..Default::default()
        };
        let rep = run_gradcheck(&cfg, &Executor::serial()).unwrap();
        assert_eq!(rep.classes.len(), 1);
        assert_eq!(rep.classes[0].class, ParamClass::Amplitude);
    }

    #[test]
    fn class_names_parse() {
        for c in ParamClass::ALL {
            assert_eq!(c.to_string().parse::<ParamClass>().unwrap(), c);
        }
        assert!("bogus".parse::<ParamClass>().is_err());
    }
}
