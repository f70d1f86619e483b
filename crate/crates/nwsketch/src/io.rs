//! Snapshot files, metric streams, reports and run manifests.

use std::collections::BTreeMap;
use std::path::Path;

use nwsketch_core::snapshot::{decode_nws, encode_nws};
use nwsketch_core::trainer::TrainRecord;
use nwsketch_core::NwSketch;
use serde::Serialize;

use crate::error::{io_err, Error, Result};

pub fn save_nws(sketch: &NwSketch, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_nws(sketch)).map_err(io_err(path))
}

pub fn load_nws(path: impl AsRef<Path>) -> Result<NwSketch> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Ok(decode_nws(&bytes)?)
}

pub const METRIC_COLUMNS: [&str; 7] = [
    "iter",
    "train_loss",
    "test_loss",
    "test_accuracy",
    "examples_backpropagated",
    "wall_clock_ns",
    "sketch_updated",
];

/// One row per record; the header is [`METRIC_COLUMNS`].
pub fn write_metrics(records: &[TrainRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|source| Error::Csv { path: path.to_path_buf(), source })?;
    for r in records {
        w.serialize(r).map_err(|source| Error::Csv { path: path.to_path_buf(), source })?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_metrics(path: impl AsRef<Path>) -> Result<Vec<TrainRecord>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|source| Error::Csv { path: path.to_path_buf(), source })?;
    let header: Vec<String> = r
        .headers()
        .map_err(|source| Error::Csv { path: path.to_path_buf(), source })?
        .iter()
        .map(str::to_string)
        .collect();
    if header != METRIC_COLUMNS {
        return Err(Error::Data {
            path: path.to_path_buf(),
            message: format!("expected columns {}, found {}", METRIC_COLUMNS.join(","), header.join(",")),
        });
    }
    r.deserialize()
        .collect::<std::result::Result<Vec<TrainRecord>, _>>()
        .map_err(|source| Error::Csv { path: path.to_path_buf(), source })
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

/// Human-readable record of an invocation; contains no timestamps so reruns
/// produce identical files.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest<C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub seed: u64,
    pub args: BTreeMap<String, String>,
    pub config: C,
}

impl<C: Serialize> Manifest<C> {
    pub fn new(subcommand: &str, seed: u64, config: C) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            subcommand: subcommand.to_string(),
            seed,
            args: BTreeMap::new(),
            config,
        }
    }

    pub fn arg(mut self, key: &str, value: impl ToString) -> Self {
        self.args.insert(key.to_string(), value.to_string());
        self
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(path, text).map_err(io_err(path))
    }
}
