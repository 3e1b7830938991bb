//! Minimal single-file NIfTI-1 (`.nii`) reader and writer.
//!
//! Supported: 3D volumes (a trailing singleton 4th dimension is accepted),
//! datatypes uint8, int16 and float32, either byte order on read, and
//! qform/sform affines that are identity-rotation or diagonal. Diagonal
//! entries become the voxel spacing and the translation becomes the origin.

use super::{GridSpec, Volume};
use crate::error::{Error, Result};

const HEADER_SIZE: usize = 348;
const VOX_OFFSET: usize = 352;

const DT_UINT8: i16 = 2;
const DT_INT16: i16 = 4;
const DT_FLOAT32: i16 = 16;

fn err(field: &'static str, message: impl Into<String>) -> Error {
    Error::Nifti {
        field,
        message: message.into(),
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    little: bool,
}

impl Reader<'_> {
    fn take<const N: usize>(&self, offset: usize) -> [u8; N] {
        let mut b = [0u8; N];
        b.copy_from_slice(&self.bytes[offset..offset + N]);
        if !self.little {
            b.reverse();
        }
        b
    }
    fn i16(&self, offset: usize) -> i16 {
        i16::from_le_bytes(self.take(offset))
    }
    fn f32(&self, offset: usize) -> f32 {
        f32::from_le_bytes(self.take(offset))
    }
}

/// Parses a `.nii` byte buffer.
pub fn decode(bytes: &[u8]) -> Result<Volume> {
    if bytes.len() < HEADER_SIZE {
        return Err(err("sizeof_hdr", format!("file has {} bytes, header needs 348", bytes.len())));
    }
    let sizeof_le = i32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    let sizeof_be = i32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    let little = if sizeof_le == HEADER_SIZE as i32 {
        true
    } else if sizeof_be == HEADER_SIZE as i32 {
        false
    } else {
        return Err(err("sizeof_hdr", format!("expected 348, got {sizeof_le}")));
    };
    let r = Reader { bytes, little };

    if &bytes[344..348] != b"n+1\0" {
        return Err(err(
            "magic",
            format!("expected single-file \"n+1\", got {:?}", String::from_utf8_lossy(&bytes[344..347])),
        ));
    }

    let dim: Vec<i16> = (0..8).map(|i| r.i16(40 + 2 * i)).collect();
    let ndim = dim[0];
    if !(3..=4).contains(&ndim) || (ndim == 4 && dim[4] != 1) {
        return Err(err("dim", format!("only 3D volumes are supported, dim = {dim:?}")));
    }
    if dim[1..4].iter().any(|&d| d < 1) {
        return Err(err("dim", format!("non-positive extent in {dim:?}")));
    }
    let dims = [dim[1] as usize, dim[2] as usize, dim[3] as usize];

    let datatype = r.i16(70);
    let width = match datatype {
        DT_UINT8 => 1,
        DT_INT16 => 2,
        DT_FLOAT32 => 4,
        other => return Err(err("datatype", format!("unsupported datatype {other}"))),
    };

    let pixdim: Vec<f32> = (0..8).map(|i| r.f32(76 + 4 * i)).collect();
    let vox_offset = r.f32(108);
    if !(vox_offset >= HEADER_SIZE as f32) {
        return Err(err("vox_offset", format!("invalid offset {vox_offset}")));
    }
    let vox_offset = vox_offset as usize;
    let scl_slope = r.f32(112);
    let scl_inter = r.f32(116);
    let qform_code = r.i16(252);
    let sform_code = r.i16(254);

    let (spacing, origin) = if sform_code > 0 {
        sform_geometry(&r)?
    } else if qform_code > 0 {
        qform_geometry(&r, &pixdim)?
    } else {
        (
            [pixdim[1] as f64, pixdim[2] as f64, pixdim[3] as f64],
            [0.0; 3],
        )
    };
    let grid = GridSpec::new(dims, spacing, origin).map_err(|e| err("pixdim", e.to_string()))?;

    let n = grid.voxel_count();
    let end = vox_offset + n * width;
    if bytes.len() < end {
        return Err(Error::DataLength {
            expected: n,
            got: bytes.len().saturating_sub(vox_offset) / width,
        });
    }
    let (slope, inter) = if scl_slope != 0.0 && scl_slope.is_finite() {
        (scl_slope, if scl_inter.is_finite() { scl_inter } else { 0.0 })
    } else {
        (1.0, 0.0)
    };
    let data = (0..n)
        .map(|i| {
            let off = vox_offset + i * width;
            let raw = match datatype {
                DT_UINT8 => bytes[off] as f32,
                DT_INT16 => r.i16(off) as f32,
                _ => r.f32(off),
            };
            raw * slope + inter
        })
        .collect();
    Volume::new(grid, data)
}

fn sform_geometry(r: &Reader) -> Result<([f64; 3], [f64; 3])> {
    const ROWS: [(&str, usize); 3] = [("srow_x", 280), ("srow_y", 296), ("srow_z", 312)];
    let mut spacing = [0.0; 3];
    let mut origin = [0.0; 3];
    for (axis, (name, base)) in ROWS.iter().enumerate() {
        let row: Vec<f64> = (0..4).map(|c| r.f32(base + 4 * c) as f64).collect();
        let diag = row[axis];
        for (c, v) in row.iter().enumerate().take(3) {
            if c != axis && v.abs() > 1e-6 * diag.abs().max(1.0) {
                return Err(err(name, format!("non-diagonal affine entry [{c}] = {v}")));
            }
        }
        if !(diag > 0.0) {
            return Err(err(name, format!("diagonal entry must be positive, got {diag}")));
        }
        spacing[axis] = diag;
        origin[axis] = row[3];
    }
    Ok((spacing, origin))
}

fn qform_geometry(r: &Reader, pixdim: &[f32]) -> Result<([f64; 3], [f64; 3])> {
    for (name, off) in [("quatern_b", 256), ("quatern_c", 260), ("quatern_d", 264)] {
        let v = r.f32(off);
        if v.abs() > 1e-6 {
            return Err(err(name, format!("non-identity qform rotation ({name} = {v})")));
        }
    }
    if pixdim[0] < 0.0 {
        return Err(err("pixdim", "qfac = -1 (flipped z) is not a positive diagonal affine"));
    }
    Ok((
        [pixdim[1] as f64, pixdim[2] as f64, pixdim[3] as f64],
        [r.f32(268) as f64, r.f32(272) as f64, r.f32(276) as f64],
    ))
}

/// Serializes as little-endian float32 with identity qform and diagonal
/// sform.
pub fn encode(v: &Volume) -> Vec<u8> {
    let grid = v.grid();
    let mut h = vec![0u8; VOX_OFFSET];
    let put_i16 = |h: &mut [u8], off: usize, x: i16| h[off..off + 2].copy_from_slice(&x.to_le_bytes());
    let put_i32 = |h: &mut [u8], off: usize, x: i32| h[off..off + 4].copy_from_slice(&x.to_le_bytes());
    let put_f32 = |h: &mut [u8], off: usize, x: f32| h[off..off + 4].copy_from_slice(&x.to_le_bytes());

    put_i32(&mut h, 0, HEADER_SIZE as i32);
    h[38] = b'r';
    let dim = [3, grid.dims[0] as i16, grid.dims[1] as i16, grid.dims[2] as i16, 1, 1, 1, 1];
    for (i, d) in dim.iter().enumerate() {
        put_i16(&mut h, 40 + 2 * i, *d);
    }
    put_i16(&mut h, 70, DT_FLOAT32);
    put_i16(&mut h, 72, 32);
    let pixdim = [
        1.0,
        grid.spacing[0] as f32,
        grid.spacing[1] as f32,
        grid.spacing[2] as f32,
        1.0,
        1.0,
        1.0,
        1.0,
    ];
    for (i, p) in pixdim.iter().enumerate() {
        put_f32(&mut h, 76 + 4 * i, *p);
    }
    put_f32(&mut h, 108, VOX_OFFSET as f32);
    put_f32(&mut h, 112, 1.0);
    h[123] = 2; // mm
    put_i16(&mut h, 252, 1);
    put_i16(&mut h, 254, 1);
    for a in 0..3 {
        put_f32(&mut h, 268 + 4 * a, grid.origin[a] as f32);
        let base = 280 + 16 * a;
        put_f32(&mut h, base + 4 * a, grid.spacing[a] as f32);
        put_f32(&mut h, base + 12, grid.origin[a] as f32);
    }
    h[344..348].copy_from_slice(b"n+1\0");

    h.reserve(v.len() * 4);
    for x in v.data() {
        h.extend_from_slice(&x.to_le_bytes());
    }
    h
}
