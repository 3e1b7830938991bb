//! Zero-shot volumetric super-resolution with an explicit anisotropic 3D
//! Gaussian field.
//!
//! A low-resolution volume seeds one Gaussian per foreground voxel. Each
//! Gaussian carries a position, a covariance (three log-scales plus a unit
//! quaternion), an amplitude and a relaxation proxy. Intensities are rendered
//! as a normalized weighted average of Gaussian contributions, which is
//! commutative, so the production rasterizer bins Gaussians into bricks of
//! voxels and processes bricks independently with no depth sorting. The
//! backward pass uses the cached per-voxel numerator and denominator to form
//! analytic gradients, and a moment-based optimizer fits the field to the
//! single input volume. The fitted field can then be sampled on any grid.
//!
//! Parallel work goes through [`exec::Executor`], which uses rayon when the
//! `parallel` feature is enabled (the default) and runs serially otherwise.

pub mod cli;
pub mod error;
pub mod exec;
pub mod field;
pub mod gradcheck;
pub mod linalg;
pub mod metrics;
pub mod optimize;
pub mod raster;
pub mod real;
pub mod render;
pub mod volume;

pub use error::{Error, Result};
pub use exec::Executor;
pub use field::{CovarianceFactors, GaussianField, InitConfig};
pub use metrics::{MetricReport, Psnr};
pub use optimize::{FitConfig, FitReport, LossKind};
pub use raster::{BrickIndex, GradientBuffer, RasterOptions, Rasterizer, RenderCache};
pub use real::Real;
pub use render::{Precision, RenderOptions};
pub use volume::{GridSpec, Volume};
