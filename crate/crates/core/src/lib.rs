//! Locality-sensitive sketches for kernel regression, and an importance
//! sampler that uses them as a per-example loss proxy during training.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, dataset
//! ingestion and the command-line tools live in the `nwsketch` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod data;
pub mod error;
pub mod estimate;
pub mod lsh;
pub mod model;
pub mod nws;
pub mod ols;
pub mod race;
pub mod rng;
pub mod sampler;
pub mod snapshot;
pub mod stats;
pub mod trainer;

pub use error::{Error, Result, SnapshotError};
pub use estimate::{estimate_mean, estimate_mom, Estimator};
pub use lsh::{collision_kernel, spawn_functions, FamilyKind, LshFamilySpec, SrpHash};
pub use nws::{error_bound, rows_for_error, NwConfig, NwExactOracle, NwSketch};
pub use race::RaceSketch;
