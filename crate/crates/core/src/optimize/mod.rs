//! Fits a Gaussian field to a single volume by gradient descent on the
//! rendered reconstruction error.

mod adam;
mod loss;

pub use adam::{step_optimizer, AdamParams, AdamState, GroupLrs, Moments};
pub use loss::{loss_and_grad, loss_and_grad_values, LossKind};

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::field::{init_from_volume, save_field, FieldFlags, GaussianField, InitConfig};
use crate::raster::{RasterOptions, Rasterizer};
use crate::real::Real;
use crate::render::Precision;
use crate::volume::{GridSpec, Volume};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub iterations: usize,
    pub loss: LossKind,
    /// Defaults to `1e-3 × mean voxel spacing` of the input.
    pub lr_position: Option<f64>,
    pub lr_scale: f64,
    pub lr_rotation: f64,
    pub lr_amplitude: f64,
    pub lr_relax: f64,
    pub adam: AdamParams,
    pub amplitude_enabled: bool,
    pub relax_enabled: bool,
    /// Write a checkpoint every this many iterations (0 disables).
    pub checkpoint_every: usize,
    pub checkpoint_dir: Option<PathBuf>,
    pub raster: RasterOptions,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            iterations: 2000,
            loss: LossKind::L1,
            lr_position: None,
            lr_scale: 5e-3,
            lr_rotation: 1e-3,
            lr_amplitude: 2.5e-2,
            lr_relax: 2.5e-2,
            adam: AdamParams::default(),
            amplitude_enabled: true,
            relax_enabled: true,
            checkpoint_every: 0,
            checkpoint_dir: None,
            raster: RasterOptions::default(),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        self.raster.validate()?;
        let lrs = [
            self.lr_position.unwrap_or(0.0),
            self.lr_scale,
            self.lr_rotation,
            self.lr_amplitude,
            self.lr_relax,
        ];
        if lrs.iter().any(|lr| !lr.is_finite() || *lr < 0.0) {
            return Err(Error::Config(format!("learning rates must be finite and >= 0, got {lrs:?}")));
        }
        let a = &self.adam;
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || !(a.eps > 0.0) {
            return Err(Error::Config(format!("invalid optimizer constants {a:?}")));
        }
        if self.checkpoint_every > 0 && self.checkpoint_dir.is_none() {
            return Err(Error::Config("checkpoint_every needs a checkpoint directory".into()));
        }
        Ok(())
    }

    pub fn flags(&self) -> FieldFlags {
        FieldFlags {
            amplitude_enabled: self.amplitude_enabled,
            relax_enabled: self.relax_enabled,
        }
    }

    pub fn learning_rates(&self, grid: &GridSpec) -> GroupLrs {
        GroupLrs {
            position: self.lr_position.unwrap_or(1e-3 * grid.mean_spacing()),
            scale: self.lr_scale,
            rotation: self.lr_rotation,
            amplitude: self.lr_amplitude,
            relax: self.lr_relax,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub loss: f64,
    /// Seconds since the fit started.
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub gaussians: usize,
    /// Loss before each update.
    pub history: Vec<IterationRecord>,
    /// Loss of the returned field.
    pub final_loss: f64,
    pub total_time: f64,
    pub checkpoints: Vec<PathBuf>,
}

impl FitReport {
    pub fn losses(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.loss).collect()
    }

    /// One JSON object per iteration, then a summary line.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        for r in &self.history {
            serde_json::to_writer(&mut out, r)?;
            out.push(b'\n');
        }
        let summary = serde_json::json!({
            "final": {
                "gaussians": self.gaussians,
                "iterations": self.history.len(),
                "loss": self.final_loss,
                "total_time": self.total_time,
            }
        });
        serde_json::to_writer(&mut out, &summary)?;
        out.push(b'\n');
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(&out))
            .map_err(|e| Error::io(path, e))
    }
}

/// Seeds a field from `lr` and fits it to `lr`.
pub fn fit(lr: &Volume, init: &InitConfig, cfg: &FitConfig, exec: &Executor) -> Result<(GaussianField, FitReport)> {
    fit_with(lr, init, cfg, exec, |_| {})
}

pub fn fit_with(
    lr: &Volume,
    init: &InitConfig,
    cfg: &FitConfig,
    exec: &Executor,
    progress: impl FnMut(&IterationRecord),
) -> Result<(GaussianField, FitReport)> {
    cfg.validate()?;
    let mut field = init_from_volume(lr, init)?;
    field.set_flags(cfg.flags());
    let report = fit_field(&mut field, lr, cfg, exec, progress)?;
    Ok((field, report))
}

/// Continues optimizing an existing field against `target`. The field's own
/// flags decide which groups are trained.
pub fn fit_field(
    field: &mut GaussianField,
    target: &Volume,
    cfg: &FitConfig,
    exec: &Executor,
    progress: impl FnMut(&IterationRecord),
) -> Result<FitReport> {
    cfg.validate()?;
    match cfg.raster.render.precision {
        Precision::F32 => run::<f32>(field, target, cfg, exec, progress),
        Precision::F64 => run::<f64>(field, target, cfg, exec, progress),
    }
}

fn evaluate<T: Real>(
    rast: &Rasterizer,
    field: &GaussianField,
    grid: &GridSpec,
    target: &[f64],
    kind: LossKind,
) -> Result<(f64, Vec<f64>, crate::raster::BrickIndex, crate::raster::RenderCache<T>)> {
    let idx = rast.build_index(field, grid)?;
    let cache = rast.forward::<T>(field, grid, &idx)?;
    let (loss, grad) = loss_and_grad_values(&cache.intensities_f64(), target, kind)?;
    Ok((loss, grad, idx, cache))
}

fn run<T: Real>(
    field: &mut GaussianField,
    target: &Volume,
    cfg: &FitConfig,
    exec: &Executor,
    mut progress: impl FnMut(&IterationRecord),
) -> Result<FitReport> {
    let start = Instant::now();
    let grid = target.grid();
    let rast = Rasterizer::new(cfg.raster, exec.clone())?;
    let lrs = cfg.learning_rates(grid);
    let tgt: Vec<f64> = target.data().iter().map(|&x| x as f64).collect();
    let mut state = AdamState::new(field.len());
    let mut history = Vec::with_capacity(cfg.iterations);
    let mut checkpoints: Vec<PathBuf> = Vec::new();

    for it in 0..cfg.iterations {
        let (loss, dl_di, idx, cache) = evaluate::<T>(&rast, field, grid, &tgt, cfg.loss)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                iteration: it,
                checkpoint: checkpoints.last().cloned(),
            });
        }
        let rec = IterationRecord {
            iteration: it,
            loss,
            wall_time: start.elapsed().as_secs_f64(),
        };
        progress(&rec);
        history.push(rec);
        let grads = rast.backward(field, grid, &idx, &cache, &dl_di)?;
        step_optimizer(field, &grads, &mut state, &lrs, &cfg.adam);

        let done = it + 1;
        if cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 {
            if let Some(dir) = &cfg.checkpoint_dir {
                checkpoints.push(write_checkpoint(dir, done, field, &state)?);
            }
        }
    }

    let (final_loss, ..) = evaluate::<T>(&rast, field, grid, &tgt, cfg.loss)?;
    if !final_loss.is_finite() {
        return Err(Error::NonFiniteLoss {
            iteration: cfg.iterations,
            checkpoint: checkpoints.last().cloned(),
        });
    }
    Ok(FitReport {
        gaussians: field.len(),
        history,
        final_loss,
        total_time: start.elapsed().as_secs_f64(),
        checkpoints,
    })
}

/// Saves `ckpt_NNNNNN.gsv` plus an optimizer-state sidecar and returns the
/// field path.
pub fn write_checkpoint(dir: &Path, iteration: usize, field: &GaussianField, state: &AdamState) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(format!("ckpt_{iteration:06}.gsv"));
    save_field(field, &path)?;
    let side = path.with_extension("optim.json");
    let json = serde_json::to_vec(state)?;
    std::fs::write(&side, json).map_err(|e| Error::io(&side, e))?;
    Ok(path)
}
