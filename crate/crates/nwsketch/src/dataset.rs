//! Dataset references: a CSV path or a synthesizer spec string.
//!
//! Synthesizer specs look like `two-gaussians:n=4000,d=8,separation=2.5` or
//! `smooth-angular:n=2000,d=4,noise=0.1`. Anything else is treated as a path
//! (an explicit `csv:` prefix is also accepted).

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use nwsketch_core::data::{synth_classification, synth_regression, RegressionKind, TabularDataset};
use nwsketch_core::rng::{stream_seed, Stream};

use crate::csvio::{load_csv, CsvOptions};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSpec {
    TwoGaussians { n: usize, d: usize, separation: f64, label_noise: f64, seed: Option<u64> },
    Regression { kind: RegressionKind, n: usize, d: usize, noise: f64, seed: Option<u64> },
    Csv(PathBuf),
}

impl DatasetSpec {
    /// Synthetic data draws from the root seed's synthesis stream unless the
    /// spec pins its own `seed=`.
    pub fn load(&self, root_seed: u64, csv: &CsvOptions) -> Result<TabularDataset> {
        let derived = stream_seed(root_seed, Stream::Synthesis);
        Ok(match self {
            DatasetSpec::TwoGaussians { n, d, separation, label_noise, seed } => {
                synth_classification(*n, *d, *separation, *label_noise, seed.unwrap_or(derived))?
            }
            DatasetSpec::Regression { kind, n, d, noise, seed } => {
                synth_regression(*kind, *n, *d, *noise, seed.unwrap_or(derived))?
            }
            DatasetSpec::Csv(path) => load_csv(path, csv)?,
        })
    }

    pub fn is_synthetic(&self) -> bool {
        !matches!(self, DatasetSpec::Csv(_))
    }

    /// Known response bound of a synthetic regression task (noise-free).
    pub fn response_bound(&self) -> Option<f64> {
        match self {
            DatasetSpec::Regression { kind, .. } => kind.bound(),
            _ => None,
        }
    }
}

fn kind_name(kind: RegressionKind) -> &'static str {
    match kind {
        RegressionKind::SmoothAngular => "smooth-angular",
        RegressionKind::Step => "step",
        RegressionKind::Linear => "linear",
    }
}

impl fmt::Display for DatasetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetSpec::TwoGaussians { n, d, separation, label_noise, seed } => {
                write!(f, "two-gaussians:n={n},d={d},separation={separation},label_noise={label_noise}")?;
                if let Some(s) = seed {
                    write!(f, ",seed={s}")?;
                }
                Ok(())
            }
            DatasetSpec::Regression { kind, n, d, noise, seed } => {
                write!(f, "{}:n={n},d={d},noise={noise}", kind_name(*kind))?;
                if let Some(s) = seed {
                    write!(f, ",seed={s}")?;
                }
                Ok(())
            }
            DatasetSpec::Csv(p) => write!(f, "csv:{}", p.display()),
        }
    }
}

impl FromStr for DatasetSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |message: String| Error::DatasetSpec { spec: s.to_string(), message };
        if let Some(path) = s.strip_prefix("csv:") {
            return Ok(DatasetSpec::Csv(PathBuf::from(path)));
        }
        let (kind, params) = match s.split_once(':') {
            Some((k, p)) => (k, p),
            None => (s, ""),
        };
        let synthetic = matches!(kind, "two-gaussians" | "smooth-angular" | "step" | "linear");
        if !synthetic {
            return Ok(DatasetSpec::Csv(PathBuf::from(s)));
        }
        let mut kv = BTreeMap::new();
        for part in params.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got {part:?}")))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let mut take = |key: &str, default: &str| kv.remove(key).unwrap_or_else(|| default.to_string());
        fn num<T: FromStr>(v: String, key: &str, bad: &dyn Fn(String) -> Error) -> Result<T> {
            v.parse().map_err(|_| bad(format!("{key}={v} is not a valid number")))
        }
        let n = num(take("n", "2000"), "n", &bad)?;
        let d = num(take("d", "8"), "d", &bad)?;
        let seed = match kv.remove("seed") {
            Some(v) => Some(num(v, "seed", &bad)?),
            None => None,
        };
        let mut take = |key: &str, default: &str| kv.remove(key).unwrap_or_else(|| default.to_string());
        let spec = match kind {
            "two-gaussians" => DatasetSpec::TwoGaussians {
                n,
                d,
                separation: num(take("separation", "2.0"), "separation", &bad)?,
                label_noise: num(take("label_noise", "0.0"), "label_noise", &bad)?,
                seed,
            },
            other => DatasetSpec::Regression {
                kind: match other {
                    "smooth-angular" => RegressionKind::SmoothAngular,
                    "step" => RegressionKind::Step,
                    _ => RegressionKind::Linear,
                },
                n,
                d,
                noise: num(take("noise", "0.0"), "noise", &bad)?,
                seed,
            },
        };
        if let Some(extra) = kv.keys().next() {
            return Err(bad(format!("unknown parameter {extra:?}")));
        }
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_displays() {
        let s: DatasetSpec = "two-gaussians:n=100,d=3,separation=1.5,label_noise=0.1".parse().unwrap();
        assert_eq!(
            s,
            DatasetSpec::TwoGaussians { n: 100, d: 3, separation: 1.5, label_noise: 0.1, seed: None }
        );
        assert_eq!(s.to_string().parse::<DatasetSpec>().unwrap(), s);
        let r: DatasetSpec = "smooth-angular:n=10,d=2,noise=0.5,seed=3".parse().unwrap();
        assert_eq!(r.to_string().parse::<DatasetSpec>().unwrap(), r);
        assert_eq!(r.response_bound(), Some(1.0));
        assert_eq!("data/energy.csv".parse::<DatasetSpec>().unwrap(), DatasetSpec::Csv("data/energy.csv".into()));
        assert_eq!("csv:step".parse::<DatasetSpec>().unwrap(), DatasetSpec::Csv("step".into()));
    }

    #[test]
    fn rejects_bad_params() {
        assert!("step:n=abc".parse::<DatasetSpec>().is_err());
        assert!("step:bogus=1".parse::<DatasetSpec>().is_err());
        assert!("step:n".parse::<DatasetSpec>().is_err());
    }

    #[test]
    fn load_is_seeded() {
        let s: DatasetSpec = "linear:n=20,d=2".parse().unwrap();
        let a = s.load(1, &CsvOptions::default()).unwrap();
        assert_eq!(a, s.load(1, &CsvOptions::default()).unwrap());
        assert_ne!(a, s.load(2, &CsvOptions::default()).unwrap());
    }
}
