//! File formats, dataset loading, experiment drivers and the command-line
//! front end for the Nadaraya-Watson sketch.

pub mod config;
pub mod cli;
pub mod csvio;
pub mod dataset;
pub mod error;
pub mod experiments;
pub mod io;

pub use error::{Error, Result};
