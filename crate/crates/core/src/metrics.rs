//! PSNR and full-3D SSIM with a fixed data range of 1.0.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::volume::{GridSpec, Volume};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const DATA_RANGE: f64 = 1.0;
const C1: f64 = (0.01 * DATA_RANGE) * (0.01 * DATA_RANGE);
const C2: f64 = (0.03 * DATA_RANGE) * (0.03 * DATA_RANGE);

/// PSNR in dB, or `Identical` when the mean squared error is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Db(f64),
    Identical,
}

impl Psnr {
    /// `f64::INFINITY` for identical inputs.
    pub fn value(self) -> f64 {
        match self {
            Psnr::Db(x) => x,
            Psnr::Identical => f64::INFINITY,
        }
    }
}

impl Serialize for Psnr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Psnr::Db(x) => s.serialize_f64(*x),
            Psnr::Identical => s.serialize_str("identical"),
        }
    }
}

impl<'de> Deserialize<'de> for Psnr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Psnr::Db(x)),
            Raw::Text(t) if t == "identical" => Ok(Psnr::Identical),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("invalid psnr {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub psnr: Psnr,
    pub ssim: f64,
    pub grid: GridSpec,
}

pub fn mse(x: &Volume, y: &Volume) -> Result<f64> {
    x.check_same_grid(y)?;
    let sum: f64 = x
        .data()
        .iter()
        .zip(y.data())
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum();
    Ok(sum / x.len() as f64)
}

pub fn psnr(x: &Volume, y: &Volume) -> Result<Psnr> {
    let m = mse(x, y)?;
    Ok(if m == 0.0 {
        Psnr::Identical
    } else {
        Psnr::Db(10.0 * (DATA_RANGE * DATA_RANGE / m).log10())
    })
}

fn window_1d() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as isize;
    (-r..=r).map(|t| (-0.5 * (t as f64 / SSIM_SIGMA).powi(2)).exp()).collect()
}

/// Gaussian-weighted local mean; near borders only in-range taps are used
/// and the weights renormalized.
fn local_mean(data: &[f64], dims: [usize; 3], win: &[f64]) -> Vec<f64> {
    let r = (win.len() / 2) as isize;
    let strides = [1, dims[0], dims[0] * dims[1]];
    let mut cur = data.to_vec();
    let mut next = vec![0.0; data.len()];
    for axis in 0..3 {
        let n = dims[axis] as isize;
        let stride = strides[axis];
        for (lin, out) in next.iter_mut().enumerate() {
            let pos = ((lin / stride) % dims[axis]) as isize;
            let base = lin - pos as usize * stride;
            let (mut acc, mut wsum) = (0.0, 0.0);
            for (t, &w) in win.iter().enumerate() {
                let q = pos + t as isize - r;
                if (0..n).contains(&q) {
                    acc += w * cur[base + q as usize * stride];
                    wsum += w;
                }
            }
            *out = acc / wsum;
        }
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}

/// Mean local SSIM over the volume with an 11³ Gaussian window (σ = 1.5).
pub fn ssim3d(x: &Volume, y: &Volume) -> Result<f64> {
    x.check_same_grid(y)?;
    let dims = x.dims();
    if dims.iter().any(|&d| d < SSIM_WINDOW) {
        return Err(Error::SsimTooSmall {
            dims,
            window: SSIM_WINDOW,
        });
    }
    let win = window_1d();
    let xs: Vec<f64> = x.data().iter().map(|&v| v as f64).collect();
    let ys: Vec<f64> = y.data().iter().map(|&v| v as f64).collect();
    let prod = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).collect::<Vec<_>>();
    let mx = local_mean(&xs, dims, &win);
    let my = local_mean(&ys, dims, &win);
    let mxx = local_mean(&prod(&xs, &xs), dims, &win);
    let myy = local_mean(&prod(&ys, &ys), dims, &win);
    let mxy = local_mean(&prod(&xs, &ys), dims, &win);
    let total: f64 = (0..xs.len())
        .map(|v| {
            let (ux, uy) = (mx[v], my[v]);
            let vx = mxx[v] - ux * ux;
            let vy = myy[v] - uy * uy;
            let cxy = mxy[v] - ux * uy;
            ((2.0 * ux * uy + C1) * (2.0 * cxy + C2)) / ((ux * ux + uy * uy + C1) * (vx + vy + C2))
        })
        .sum();
    Ok(total / xs.len() as f64)
}

pub fn evaluate(pred: &Volume, reference: &Volume) -> Result<MetricReport> {
    Ok(MetricReport {
        psnr: psnr(pred, reference)?,
        ssim: ssim3d(pred, reference)?,
        grid: pred.grid().clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_volume(dims: [usize; 3], seed: u64) -> Volume {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = GridSpec::unit(dims);
        // Smooth-ish structure plus noise, kept away from 0 and 1.
        Volume::from_fn(g, |[i, j, k]| {
            let s = ((i as f32) * 0.4).sin() * ((j as f32) * 0.3).cos() + (k as f32 * 0.2).sin();
            (0.5 + 0.15 * s + rng.gen_range(-0.05..0.05)).clamp(0.0, 1.0)
        })
    }

    #[test]
    fn psnr_identical_sentinel() {
        let x = random_volume([4, 4, 4], 1);
        assert_eq!(psnr(&x, &x).unwrap(), Psnr::Identical);
        assert_eq!(serde_json::to_string(&Psnr::Identical).unwrap(), "\"identical\"");
    }

    #[test]
    fn psnr_uniform_error() {
        let g = GridSpec::unit([5, 5, 5]);
        let x = Volume::filled(g.clone(), 0.2);
        let y = Volume::filled(g.clone(), 0.3);
        let Psnr::Db(p) = psnr(&x, &y).unwrap() else { panic!() };
        assert!((p - 20.0).abs() < 1e-4, "{p}");
        let z = Volume::filled(g, 0.7);
        let Psnr::Db(p) = psnr(&x, &z).unwrap() else { panic!() };
        assert!((p - 10.0 * 4f64.log10()).abs() < 1e-4);
        assert!((p - 6.02).abs() < 0.01);
    }

    #[test]
    fn psnr_decreases_with_noise() {
        let x = random_volume([6, 6, 6], 2);
        let mut last = f64::INFINITY;
        for amp in [0.01f32, 0.02, 0.05, 0.1, 0.2] {
            let y = Volume::new(x.grid().clone(), x.data().iter().map(|v| v + amp).collect()).unwrap();
            let p = psnr(&x, &y).unwrap().value();
            assert!(p < last);
            last = p;
        }
    }

    #[test]
    fn ssim_self_is_exactly_one() {
        let x = random_volume([12, 11, 13], 3);
        assert_eq!(ssim3d(&x, &x).unwrap(), 1.0);
    }

    #[test]
    fn ssim_inverted_is_negative() {
        let x = random_volume([12, 12, 12], 4);
        let y = Volume::new(x.grid().clone(), x.data().iter().map(|v| 1.0 - v).collect()).unwrap();
        assert!(ssim3d(&x, &y).unwrap() < 0.0);
    }

    #[test]
    fn ssim_constant_closed_form() {
        let g = GridSpec::unit([11, 11, 11]);
        let (a, b) = (0.4f32, 0.5f32);
        let s = ssim3d(&Volume::filled(g.clone(), a), &Volume::filled(g, b)).unwrap();
        let (a, b) = (a as f64, b as f64);
        let expected = (2.0 * a * b + C1) / (a * a + b * b + C1);
        assert!((s - expected).abs() < 1e-9, "{s} vs {expected}");
    }

    #[test]
    fn ssim_is_symmetric() {
        let x = random_volume([12, 12, 12], 5);
        let y = random_volume([12, 12, 12], 6);
        let (a, b) = (ssim3d(&x, &y).unwrap(), ssim3d(&y, &x).unwrap());
        assert!((a - b).abs() < 1e-9);
        assert_eq!(psnr(&x, &y).unwrap(), psnr(&y, &x).unwrap());
    }

    #[test]
    fn ssim_rejects_small_volumes() {
        let x = random_volume([10, 12, 12], 7);
        assert!(matches!(ssim3d(&x, &x).unwrap_err(), Error::SsimTooSmall { .. }));
    }

    #[test]
    fn mismatched_grids_error() {
        let x = random_volume([4, 4, 4], 1);
        let y = random_volume([4, 4, 5], 1);
        assert!(matches!(psnr(&x, &y).unwrap_err(), Error::GridMismatch(_)));
    }
}
