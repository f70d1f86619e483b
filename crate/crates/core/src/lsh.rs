//! Sign-random-projection (SRP) hashing.
//!
//! A hasher with `bits` projections maps a vector to the `bits`-bit sign
//! pattern of its dot products with Gaussian directions. Two vectors at angle
//! θ agree on each bit with probability `1 − θ/π`, so the full code collides
//! with probability `(1 − θ/π)^bits`: that is the kernel the sketches estimate.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{child_seed, rng_from_seed};

/// Codes wider than this would make a `2^bits`-wide sketch row unreasonably large.
pub const MAX_BITS: u32 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Srp,
}

/// Parameters from which a deterministic list of hashers is spawned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LshFamilySpec {
    pub kind: FamilyKind,
    pub bits: u32,
    pub dim: usize,
    pub seed: u64,
}

impl LshFamilySpec {
    pub fn srp(bits: u32, dim: usize, seed: u64) -> Result<Self> {
        let spec = LshFamilySpec { kind: FamilyKind::Srp, bits, dim, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bits == 0 || self.bits > MAX_BITS {
            return Err(Error::InvalidParam("bits must be in 1..=24"));
        }
        if self.dim == 0 {
            return Err(Error::InvalidParam("dim must be >= 1"));
        }
        Ok(())
    }

    /// Number of buckets per row, `2^bits`.
    pub fn width(&self) -> usize {
        1usize << self.bits
    }

    /// Collision kernel of a single hasher drawn from this family.
    pub fn kernel(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dim(self.dim, x)?;
        check_dim(self.dim, y)?;
        collision_kernel(self.bits, x, y)
    }
}

/// One SRP hash function: `bits` Gaussian projection directions over `dim` inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SrpHash {
    bits: u32,
    dim: usize,
    seed: u64,
    // row-major, bits x dim
    projections: Vec<f64>,
}

impl SrpHash {
    pub fn new(bits: u32, dim: usize, seed: u64) -> Result<Self> {
        LshFamilySpec::srp(bits, dim, seed)?;
        let mut rng = rng_from_seed(seed);
        let projections = (0..bits as usize * dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        Ok(SrpHash { bits, dim, seed, projections })
    }

    /// Builds a hasher from explicit projection directions (one per bit).
    pub fn from_projections(directions: &[&[f64]]) -> Result<Self> {
        let bits = directions.len() as u32;
        let dim = directions.first().map_or(0, |v| v.len());
        LshFamilySpec::srp(bits, dim, 0)?;
        let mut projections = Vec::with_capacity(bits as usize * dim);
        for v in directions {
            check_dim(dim, v)?;
            projections.extend_from_slice(v);
        }
        Ok(SrpHash { bits, dim, seed: 0, projections })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn width(&self) -> usize {
        1usize << self.bits
    }

    /// Bucket index `Σ_j 2^j · [⟨v_j, x⟩ ≥ 0]`.
    pub fn hash(&self, x: &[f64]) -> Result<usize> {
        check_input(self.dim, x)?;
        Ok(self.hash_unchecked(x))
    }

    pub(crate) fn hash_unchecked(&self, x: &[f64]) -> usize {
        self.projections
            .chunks_exact(self.dim)
            .enumerate()
            .fold(0usize, |code, (j, v)| {
                let dot: f64 = v.iter().zip(x).map(|(a, b)| a * b).sum();
                if dot >= 0.0 {
                    code | (1 << j)
                } else {
                    code
                }
            })
    }

    pub fn kernel(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dim(self.dim, x)?;
        check_dim(self.dim, y)?;
        collision_kernel(self.bits, x, y)
    }
}

/// Spawns `rows` hashers; hasher `r` is seeded with the `r`-th SplitMix64
/// output of the family seed, so spawning is deterministic and prefix-stable.
pub fn spawn_functions(spec: &LshFamilySpec, rows: usize) -> Result<Vec<SrpHash>> {
    spec.validate()?;
    if rows == 0 {
        return Err(Error::InvalidParam("number of hash functions must be >= 1"));
    }
    (0..rows as u64)
        .map(|r| SrpHash::new(spec.bits, spec.dim, child_seed(spec.seed, r)))
        .collect()
}

/// Angle between two nonzero vectors, in `[0, π]`.
///
/// Uses `2·atan2(|u − v|, |u + v|)` on the normalized vectors, which stays
/// accurate near 0 and π where `acos` of the cosine loses half its digits.
pub fn angle(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    let nx = norm(x);
    let ny = norm(y);
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::ZeroVector);
    }
    let (mut diff, mut sum) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (u, v) = (a / nx, b / ny);
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    Ok(2.0 * libm::atan2(libm::sqrt(diff), libm::sqrt(sum)))
}

/// Exact collision probability `(1 − θ(x, y)/π)^bits` of a `bits`-bit SRP code.
pub fn collision_kernel(bits: u32, x: &[f64], y: &[f64]) -> Result<f64> {
    let theta = angle(x, y)?;
    Ok(libm::pow(1.0 - theta / PI, f64::from(bits)))
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    libm::sqrt(x.iter().map(|v| v * v).sum())
}

fn check_dim(dim: usize, x: &[f64]) -> Result<()> {
    if x.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: x.len() });
    }
    Ok(())
}

/// Dimension, finiteness, and nonzero checks shared by everything that hashes.
pub(crate) fn check_input(dim: usize, x: &[f64]) -> Result<()> {
    check_dim(dim, x)?;
    if let Some(index) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    if x.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroVector);
    }
    Ok(())
}
