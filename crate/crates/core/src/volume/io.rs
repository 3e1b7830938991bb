use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{nifti, GridSpec, Volume};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolumeFormat {
    Nifti1,
    RawJson,
}

impl VolumeFormat {
    /// `.nii` selects NIfTI-1, `.json` the raw sidecar format.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("nii") => Ok(VolumeFormat::Nifti1),
            Some("json") => Ok(VolumeFormat::RawJson),
            other => Err(Error::RawFormat(format!(
                "cannot infer volume format from extension {other:?} (expected .nii or .json)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawMeta {
    dims: [usize; 3],
    spacing: [f64; 3],
    origin: [f64; 3],
    dtype: String,
    data_file: String,
}

fn data_path(meta_path: &Path) -> PathBuf {
    meta_path.with_extension("bin")
}

pub fn save_volume(v: &Volume, path: &Path, format: VolumeFormat) -> Result<()> {
    match format {
        VolumeFormat::Nifti1 => {
            let bytes = nifti::encode(v);
            fs::write(path, bytes).map_err(|e| Error::io(path, e))
        }
        VolumeFormat::RawJson => {
            let bin = data_path(path);
            let grid = v.grid();
            let meta = RawMeta {
                dims: grid.dims,
                spacing: grid.spacing,
                origin: grid.origin,
                dtype: "f32".into(),
                data_file: bin
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default(),
            };
            let mut bytes = Vec::with_capacity(v.len() * 4);
            for x in v.data() {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
            fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))?;
            let json = serde_json::to_string_pretty(&meta)?;
            fs::write(path, json).map_err(|e| Error::io(path, e))
        }
    }
}

pub fn load_volume(path: &Path, format: VolumeFormat) -> Result<Volume> {
    match format {
        VolumeFormat::Nifti1 => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            nifti::decode(&bytes)
        }
        VolumeFormat::RawJson => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let meta: RawMeta = serde_json::from_str(&text)?;
            if meta.dtype != "f32" {
                return Err(Error::RawFormat(format!("unsupported dtype {:?}", meta.dtype)));
            }
            let grid = GridSpec::new(meta.dims, meta.spacing, meta.origin)?;
            let bin = path
                .parent()
                .map(|d| d.join(&meta.data_file))
                .unwrap_or_else(|| PathBuf::from(&meta.data_file));
            let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
            if bytes.len() % 4 != 0 {
                return Err(Error::RawFormat(format!(
                    "{} has {} bytes, not a multiple of 4",
                    bin.display(),
                    bytes.len()
                )));
            }
            let data = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            Volume::new(grid, data)
        }
    }
}
