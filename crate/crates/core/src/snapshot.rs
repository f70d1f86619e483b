//! Binary snapshots of RACE and Nadaraya-Watson sketches.
//!
//! All integers and floats are little-endian. A RACE snapshot is a 64-byte
//! header followed by the `rows × width` cells in row-major order:
//!
//! ```text
//! offset size field
//!      0    4 magic "RACE"
//!      4    4 version (u32, = 1)
//!      8    4 family kind (u32, 0 = SRP)
//!     12    4 bits (u32)
//!     16    8 rows (u64)
//!     24    8 width (u64, must equal 2^bits)
//!     32    8 dim (u64)
//!     40    8 master seed (u64)
//!     48    8 insert count (u64)
//!     56    4 CRC-32 of bytes 0..56
//!     60    4 CRC-32 of the cell payload
//!     64  8·R·W cells (f64)
//! ```
//!
//! An NWS snapshot is a 32-byte header followed by the top and then the bottom
//! RACE snapshot:
//!
//! ```text
//!      0    4 magic "NWSK"
//!      4    4 version (u32, = 1)
//!      8    8 y bound (f64)
//!     16    4 estimator (u32, 0 = mean, 1 = median-of-means)
//!     20    4 median-of-means groups (u32, 0 for mean)
//!     24    4 reserved (zero)
//!     28    4 CRC-32 of bytes 0..28
//! ```
//!
//! Hash functions are not stored: they are respawned from the family seed.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{Result, SnapshotError};
use crate::estimate::Estimator;
use crate::lsh::{spawn_functions, FamilyKind, LshFamilySpec, SrpHash};
use crate::nws::NwSketch;
use crate::race::RaceSketch;

pub const RACE_MAGIC: [u8; 4] = *b"RACE";
pub const NWS_MAGIC: [u8; 4] = *b"NWSK";
pub const VERSION: u32 = 1;
pub const RACE_HEADER_LEN: usize = 64;
pub const NWS_HEADER_LEN: usize = 32;

pub fn encode_race(sketch: &RaceSketch) -> Vec<u8> {
    let mut out = Vec::with_capacity(RACE_HEADER_LEN + 8 * sketch.cells().len());
    write_race(sketch, &mut out);
    out
}

fn write_race(sketch: &RaceSketch, out: &mut Vec<u8>) {
    let spec = sketch.spec();
    let start = out.len();
    out.extend_from_slice(&RACE_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&family_code(spec.kind).to_le_bytes());
    out.extend_from_slice(&spec.bits.to_le_bytes());
    out.extend_from_slice(&(sketch.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(sketch.width() as u64).to_le_bytes());
    out.extend_from_slice(&(spec.dim as u64).to_le_bytes());
    out.extend_from_slice(&spec.seed.to_le_bytes());
    out.extend_from_slice(&sketch.insert_count().to_le_bytes());
    let header_crc = crc32fast::hash(&out[start..start + 56]);
    out.extend_from_slice(&header_crc.to_le_bytes());
    let payload_start = out.len() + 4;
    out.extend_from_slice(&[0; 4]);
    for c in sketch.cells() {
        out.extend_from_slice(&c.to_le_bytes());
    }
    let payload_crc = crc32fast::hash(&out[payload_start..]);
    out[start + 60..start + 64].copy_from_slice(&payload_crc.to_le_bytes());
}

/// Decodes a RACE snapshot that must span all of `bytes`.
pub fn decode_race(bytes: &[u8]) -> Result<RaceSketch> {
    let (sketch, used) = read_race(bytes, None)?;
    if used != bytes.len() {
        return Err(SnapshotError::TrailingBytes.into());
    }
    Ok(sketch)
}

fn read_race(
    bytes: &[u8],
    shared: Option<(&LshFamilySpec, &Arc<[SrpHash]>)>,
) -> Result<(RaceSketch, usize)> {
    let header = bytes.get(..RACE_HEADER_LEN).ok_or(SnapshotError::Truncated)?;
    if header[..4] != RACE_MAGIC {
        return Err(SnapshotError::BadMagic.into());
    }
    if crc32fast::hash(&header[..56]) != u32_at(header, 56) {
        return Err(SnapshotError::HeaderChecksum.into());
    }
    let version = u32_at(header, 4);
    if version != VERSION {
        return Err(SnapshotError::UnsupportedVersion(version).into());
    }
    let kind = match u32_at(header, 8) {
        0 => FamilyKind::Srp,
        _ => return Err(SnapshotError::InconsistentHeader("unknown hash family").into()),
    };
    let bits = u32_at(header, 12);
    let rows = usize_at(header, 16)?;
    let width = usize_at(header, 24)?;
    let dim = usize_at(header, 32)?;
    let seed = u64_at(header, 40);
    let insert_count = u64_at(header, 48);
    let spec = LshFamilySpec { kind, bits, dim, seed };
    spec.validate()
        .map_err(|_| SnapshotError::InconsistentHeader("invalid bits or dim"))?;
    if width != spec.width() {
        return Err(SnapshotError::InconsistentHeader("width is not 2^bits").into());
    }
    if rows == 0 {
        return Err(SnapshotError::InconsistentHeader("zero rows").into());
    }
    let n_cells = rows
        .checked_mul(width)
        .ok_or(SnapshotError::InconsistentHeader("rows x width overflows"))?;
    let payload_len = n_cells
        .checked_mul(8)
        .ok_or(SnapshotError::InconsistentHeader("payload overflows"))?;
    let total = RACE_HEADER_LEN + payload_len;
    let payload = bytes.get(RACE_HEADER_LEN..total).ok_or(SnapshotError::Truncated)?;
    if crc32fast::hash(payload) != u32_at(header, 60) {
        return Err(SnapshotError::PayloadChecksum.into());
    }
    let cells: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let hashers = match shared {
        Some((s, h)) if *s == spec && h.len() == rows => h.clone(),
        _ => spawn_functions(&spec, rows)?.into(),
    };
    Ok((RaceSketch::from_parts(spec, hashers, cells, insert_count), total))
}

pub fn encode_nws(sketch: &NwSketch) -> Vec<u8> {
    let race_len = RACE_HEADER_LEN + 8 * sketch.top().cells().len();
    let mut out = Vec::with_capacity(NWS_HEADER_LEN + 2 * race_len);
    out.extend_from_slice(&NWS_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&sketch.y_bound().to_le_bytes());
    let (kind, groups) = match sketch.estimator() {
        Estimator::Mean => (0u32, 0u32),
        Estimator::MedianOfMeans { groups } => (1, groups as u32),
    };
    out.extend_from_slice(&kind.to_le_bytes());
    out.extend_from_slice(&groups.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    let crc = crc32fast::hash(&out[..28]);
    out.extend_from_slice(&crc.to_le_bytes());
    write_race(sketch.top(), &mut out);
    write_race(sketch.bottom(), &mut out);
    out
}

pub fn decode_nws(bytes: &[u8]) -> Result<NwSketch> {
    let header = bytes.get(..NWS_HEADER_LEN).ok_or(SnapshotError::Truncated)?;
    if header[..4] != NWS_MAGIC {
        return Err(SnapshotError::BadMagic.into());
    }
    if crc32fast::hash(&header[..28]) != u32_at(header, 28) {
        return Err(SnapshotError::HeaderChecksum.into());
    }
    let version = u32_at(header, 4);
    if version != VERSION {
        return Err(SnapshotError::UnsupportedVersion(version).into());
    }
    let y_bound = f64::from_le_bytes(header[8..16].try_into().expect("8 bytes"));
    let estimator = match (u32_at(header, 16), u32_at(header, 20)) {
        (0, 0) => Estimator::Mean,
        (1, g) if g > 0 => Estimator::MedianOfMeans { groups: g as usize },
        _ => return Err(SnapshotError::InconsistentHeader("unknown estimator").into()),
    };
    let rest = &bytes[NWS_HEADER_LEN..];
    let (top, used_top) = read_race(rest, None)?;
    let (bottom, used_bottom) = read_race(&rest[used_top..], Some((top.spec(), top.hashers())))?;
    if used_top + used_bottom != rest.len() {
        return Err(SnapshotError::TrailingBytes.into());
    }
    NwSketch::from_parts(top, bottom, y_bound, estimator)
        .map_err(|_| SnapshotError::InconsistentHeader("top and bottom arrays disagree").into())
}

fn family_code(kind: FamilyKind) -> u32 {
    match kind {
        FamilyKind::Srp => 0,
    }
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

fn u64_at(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().expect("8 bytes"))
}

fn usize_at(b: &[u8], at: usize) -> core::result::Result<usize, SnapshotError> {
    usize::try_from(u64_at(b, at)).map_err(|_| SnapshotError::InconsistentHeader("size overflows usize"))
}
