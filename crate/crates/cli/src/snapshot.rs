//! Binary field snapshots.
//!
//! Layout (all integers and floats little-endian):
//!
//! | offset | size | content                         |
//! |--------|------|---------------------------------|
//! | 0      | 4    | magic `GLS2`                    |
//! | 4      | 4    | format version, `u32` (= 1)     |
//! | 8      | 4    | band limit `L`, `u32`           |
//! | 12     | 4    | `nlat`, `u32` (= `L+1`)         |
//! | 16     | 4    | `nlon`, `u32` (= `2L+2`)        |
//! | 20     | 8    | `ε`, IEEE-754 `f64`             |
//! | 28     | …    | `3·nlat·nlon` `f64` values      |
//!
//! The payload stores the x components of all grid points, then the y
//! components, then the z components; within a component, points are
//! row-major with latitude rings (increasing colatitude) outermost.

use std::path::Path;
use std::sync::Arc;

use glsphere::spherical::{build_grid, MAX_BAND_LIMIT, MIN_BAND_LIMIT};
use glsphere::vsh::{Vec3, VectorField};

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 4] = b"GLS2";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 28;

/// A field together with the ε it belongs to (0 for pure harmonic maps).
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub epsilon: f64,
    pub field: VectorField,
}

pub fn encode(s: &Snapshot) -> Vec<u8> {
    let g = s.field.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 24 * g.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for v in [g.band_limit(), g.nlat(), g.nlon()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&s.epsilon.to_le_bytes());
    for k in 0..3 {
        for v in s.field.values() {
            out.extend_from_slice(&v[k].to_le_bytes());
        }
    }
    out
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

fn f64_at(bytes: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"))
}

pub fn decode(bytes: &[u8]) -> Result<Snapshot> {
    let bad = |msg: String| Err(CliError::Format(msg));
    if bytes.len() < HEADER_LEN {
        return bad(format!("{} bytes is shorter than the {HEADER_LEN}-byte header", bytes.len()));
    }
    if &bytes[..4] != MAGIC {
        return bad("bad magic bytes".into());
    }
    let version = u32_at(bytes, 4);
    if version != FORMAT_VERSION {
        return bad(format!("unsupported format version {version} (expected {FORMAT_VERSION})"));
    }
    let band = u32_at(bytes, 8) as usize;
    let (nlat, nlon) = (u32_at(bytes, 12) as usize, u32_at(bytes, 16) as usize);
    if !(MIN_BAND_LIMIT..=MAX_BAND_LIMIT).contains(&band) {
        return bad(format!("band limit {band} outside supported range"));
    }
    if nlat != band + 1 || nlon != 2 * band + 2 {
        return bad(format!("grid {nlat}×{nlon} does not match band limit {band}"));
    }
    let epsilon = f64_at(bytes, 20);
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return bad(format!("invalid epsilon {epsilon}"));
    }
    let n = nlat * nlon;
    let expected = HEADER_LEN + 24 * n;
    if bytes.len() != expected {
        return bad(format!("payload of {} bytes, expected {expected}", bytes.len()));
    }
    let mut values: Vec<Vec3> = vec![[0.0; 3]; n];
    for k in 0..3 {
        for (i, v) in values.iter_mut().enumerate() {
            let x = f64_at(bytes, HEADER_LEN + 8 * (k * n + i));
            if !x.is_finite() {
                return bad(format!("non-finite value at component {k}, point {i}"));
            }
            v[k] = x;
        }
    }
    let grid: Arc<_> = build_grid(band)?;
    Ok(Snapshot { epsilon, field: VectorField::new(grid, values)? })
}

pub fn save(path: &Path, s: &Snapshot) -> Result<()> {
    std::fs::write(path, encode(s))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Snapshot> {
    decode(&std::fs::read(path)?)
}
