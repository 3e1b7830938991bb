//! GSV1 binary container.
//!
//! ```text
//! offset  size  content
//! 0       4     magic "GSV1"
//! 4       8     N (u64 LE)
//! 12      4     flags (u32 LE; bit 0 amplitude_enabled, bit 1 relax_enabled)
//! 16      48·N  records of 12 f32 LE:
//!               μx μy μz ls_x ls_y ls_z qw qx qy qz raw_A raw_r
//! ```

use std::fs;
use std::path::Path;

use super::{FieldFlags, GaussianField, PARAMS_PER_GAUSSIAN};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"GSV1";
const HEADER_LEN: usize = 16;
const RECORD_LEN: usize = PARAMS_PER_GAUSSIAN * 4;

fn parse_err(offset: usize, message: impl Into<String>) -> Error {
    Error::FieldFormat {
        offset: offset as u64,
        message: message.into(),
    }
}

/// Parameters are stored as `f32`; values that are not exactly
/// representable are rounded on write.
pub fn encode_field(f: &GaussianField) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + RECORD_LEN * f.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(f.len() as u64).to_le_bytes());
    out.extend_from_slice(&f.flags().to_bits().to_le_bytes());
    for i in 0..f.len() {
        let p = f.positions()[i];
        let s = f.log_scales()[i];
        let q = f.rotations()[i];
        let rec = [
            p[0],
            p[1],
            p[2],
            s[0],
            s[1],
            s[2],
            q[0],
            q[1],
            q[2],
            q[3],
            f.raw_amplitude()[i],
            f.raw_relax()[i],
        ];
        for v in rec {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_field(bytes: &[u8]) -> Result<GaussianField> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(parse_err(0, "bad magic (expected \"GSV1\")"));
    }
    if bytes.len() < HEADER_LEN {
        return Err(parse_err(bytes.len(), "truncated header"));
    }
    let n = u64::from_le_bytes(bytes[4..12].try_into().unwrap());
    let bits = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
    let flags = FieldFlags::from_bits(bits).ok_or_else(|| parse_err(12, format!("unknown flag bits {bits:#x}")))?;

    let body = bytes.len() - HEADER_LEN;
    let complete = body / RECORD_LEN;
    if (complete as u64) < n {
        return Err(parse_err(
            HEADER_LEN + complete * RECORD_LEN,
            format!("truncated: header declares {n} records, found {complete}"),
        ));
    }
    let n = n as usize;
    let expected = HEADER_LEN + n * RECORD_LEN;
    if bytes.len() != expected {
        return Err(parse_err(expected, format!("{} trailing bytes", bytes.len() - expected)));
    }

    let mut positions = Vec::with_capacity(n);
    let mut log_scales = Vec::with_capacity(n);
    let mut rotations = Vec::with_capacity(n);
    let mut raw_amplitude = Vec::with_capacity(n);
    let mut raw_relax = Vec::with_capacity(n);
    for rec in bytes[HEADER_LEN..].chunks_exact(RECORD_LEN) {
        let v: Vec<f64> = rec
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        positions.push([v[0], v[1], v[2]]);
        log_scales.push([v[3], v[4], v[5]]);
        rotations.push([v[6], v[7], v[8], v[9]]);
        raw_amplitude.push(v[10]);
        raw_relax.push(v[11]);
    }
    GaussianField::new(positions, log_scales, rotations, raw_amplitude, raw_relax, flags)
}

pub fn save_field(f: &GaussianField, path: &Path) -> Result<()> {
    fs::write(path, encode_field(f)).map_err(|e| Error::io(path, e))
}

pub fn load_field(path: &Path) -> Result<GaussianField> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_field(&bytes)
}
