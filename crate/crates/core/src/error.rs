use alloc::string::String;
use core::fmt;

/// Errors raised by the sketch, sampler, and trainer primitives.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    DimensionMismatch { expected: usize, got: usize },
    LengthMismatch { expected: usize, got: usize },
    /// The zero vector has no direction, so SRP buckets and angles are undefined.
    ZeroVector,
    NonFinite { index: usize },
    InvalidParam(&'static str),
    /// Two sketches (or a sketch and a snapshot) were built from different
    /// shapes or hash seeds.
    Incompatible(&'static str),
    Snapshot(SnapshotError),
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotError {
    Truncated,
    BadMagic,
    UnsupportedVersion(u32),
    HeaderChecksum,
    PayloadChecksum,
    InconsistentHeader(&'static str),
    TrailingBytes,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::LengthMismatch { expected, got } => {
                write!(f, "length mismatch: expected {expected}, got {got}")
            }
            Error::ZeroVector => f.write_str("zero vector has no direction"),
            Error::NonFinite { index } => write!(f, "non-finite value at index {index}"),
            Error::InvalidParam(msg) => write!(f, "invalid parameter: {msg}"),
            Error::Incompatible(msg) => write!(f, "incompatible sketches: {msg}"),
            Error::Snapshot(e) => write!(f, "snapshot: {e}"),
            Error::Config(msg) => write!(f, "config: {msg}"),
        }
    }
}

impl fmt::Display for SnapshotError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SnapshotError::Truncated => f.write_str("truncated input"),
            SnapshotError::BadMagic => f.write_str("bad magic bytes"),
            SnapshotError::UnsupportedVersion(v) => write!(f, "unsupported version {v}"),
            SnapshotError::HeaderChecksum => f.write_str("header checksum mismatch"),
            SnapshotError::PayloadChecksum => f.write_str("payload checksum mismatch"),
            SnapshotError::InconsistentHeader(msg) => write!(f, "inconsistent header: {msg}"),
            SnapshotError::TrailingBytes => f.write_str("trailing bytes after payload"),
        }
    }
}

impl core::error::Error for Error {}

impl From<SnapshotError> for Error {
    fn from(e: SnapshotError) -> Self {
        Error::Snapshot(e)
    }
}

pub type Result<T> = core::result::Result<T, Error>;
