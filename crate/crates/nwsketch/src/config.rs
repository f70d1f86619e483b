//! Run configuration files (TOML).

use std::path::Path;

use nwsketch_core::trainer::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::csvio::{CsvOptions, TargetColumn, TaskKind};
use crate::dataset::DatasetSpec;
use crate::error::{io_err, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// CSV path or synthesizer spec string.
    pub dataset: String,
    /// Column index, header name, or `"last"`.
    pub target_column: String,
    pub has_header: bool,
    pub train_fraction: f64,
    /// Standardize features with train-split statistics.
    pub standardize: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            dataset: "two-gaussians:n=5000,d=10,separation=2.0,label_noise=0.0".into(),
            target_column: "last".into(),
            has_header: true,
            train_fraction: 0.8,
            standardize: true,
        }
    }
}

impl DataConfig {
    pub fn spec(&self) -> Result<DatasetSpec> {
        self.dataset.parse()
    }

    pub fn csv_options(&self, task: TaskKind) -> CsvOptions {
        CsvOptions {
            target: self.target_column.parse::<TargetColumn>().expect("infallible"),
            has_header: self.has_header,
            delimiter: b',',
            task,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.data.spec()?;
        if !(self.data.train_fraction > 0.0 && self.data.train_fraction < 1.0) {
            return Err(Error::Config("data.train_fraction must be in (0, 1)".into()));
        }
        self.train.validate()?;
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        // A manifest written by `train-demo` nests the run config under `config`.
        let value: toml::Value = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let cfg: RunConfig = match value.get("config") {
            Some(inner) if value.get("tool").is_some() => inner.clone().try_into(),
            _ => value.try_into(),
        }
        .map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run config is always representable in TOML")
    }
}
