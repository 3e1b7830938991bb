//! Binary 8-bit PGM export of axis midplanes.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::volume::Volume;

pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Midplane perpendicular to `axis` as `(width, height, values)`.
pub fn midplane(v: &Volume, axis: usize) -> (usize, usize, Vec<f32>) {
    let [nx, ny, nz] = v.dims();
    let mid = v.dims()[axis] / 2;
    let (w, h) = match axis {
        0 => (ny, nz),
        1 => (nx, nz),
        _ => (nx, ny),
    };
    let mut vals = Vec::with_capacity(w * h);
    for r in 0..h {
        for c in 0..w {
            let ijk = match axis {
                0 => [mid, c, r],
                1 => [c, mid, r],
                _ => [c, r, mid],
            };
            vals.push(v.get(ijk));
        }
    }
    (w, h, vals)
}

fn to_bytes(vals: &[f32], max: f32) -> Vec<u8> {
    vals.iter()
        .map(|&x| {
            let t = if max > 0.0 { (x / max).clamp(0.0, 1.0) } else { 0.0 };
            (t * 255.0).round() as u8
        })
        .collect()
}

const AXES: [&str; 3] = ["x", "y", "z"];

fn write(dir: &Path, name: String, w: usize, h: usize, px: &[u8]) -> Result<PathBuf> {
    let p = dir.join(name);
    std::fs::write(&p, encode_pgm(w, h, px)).map_err(|e| Error::io(&p, e))?;
    Ok(p)
}

/// Writes `slice_{x,y,z}.pgm`; intensities map `[0, 1]` to `[0, 255]`.
pub fn write_slices(v: &Volume, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    (0..3)
        .map(|a| {
            let (w, h, vals) = midplane(v, a);
            write(dir, format!("slice_{}.pgm", AXES[a]), w, h, &to_bytes(&vals, 1.0))
        })
        .collect()
}

/// Writes `error_{x,y,z}.pgm` of `|pred - reference|`, scaled so the
/// largest error in the volume is white.
pub fn write_error_maps(pred: &Volume, reference: &Volume, dir: &Path) -> Result<Vec<PathBuf>> {
    pred.check_same_grid(reference)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let diff: Vec<f32> = pred.data().iter().zip(reference.data()).map(|(a, b)| (a - b).abs()).collect();
    let max = diff.iter().copied().fold(0.0f32, f32::max);
    let err = Volume::new(pred.grid().clone(), diff)?;
    (0..3)
        .map(|a| {
            let (w, h, vals) = midplane(&err, a);
            write(dir, format!("error_{}.pgm", AXES[a]), w, h, &to_bytes(&vals, max))
        })
        .collect()
}
