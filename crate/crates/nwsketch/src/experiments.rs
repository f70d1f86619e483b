//! Experiment drivers shared by the CLI and the test suites.

use nwsketch_core::data::{synth_regression, RegressionKind, Split, Standardizer, TabularDataset};
use nwsketch_core::ols::fit_linear_regression;
use nwsketch_core::rng::{child_seed, stream_seed, Stream};
use nwsketch_core::stats::{mse, percentile};
use nwsketch_core::trainer::{compare_runs, run_adaptive, run_baseline, Clock, ComparisonReport, TrainRun};
use nwsketch_core::{error_bound, Estimator, LshFamilySpec, NwConfig, NwExactOracle, NwSketch};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::csvio::{CsvOptions, TaskKind};
use crate::dataset::DatasetSpec;
use crate::error::{Error, Result};

/// Loads, splits and (optionally) standardizes with train-split statistics.
pub fn prepare(
    spec: &DatasetSpec,
    csv: &CsvOptions,
    train_fraction: f64,
    standardize: bool,
    seed: u64,
) -> Result<(TabularDataset, TabularDataset)> {
    let data = spec.load(seed, csv)?;
    let split = Split::new(data.len(), train_fraction, stream_seed(seed, Stream::Split))?;
    let mut train = data.subset(&split.train);
    let mut test = data.subset(&split.test);
    if standardize {
        let st = Standardizer::fit(&train);
        st.apply(&mut train);
        st.apply(&mut test);
    }
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    /// `nws` or `ols`.
    pub method: String,
    /// Empty for the OLS row.
    pub rows: Option<usize>,
    pub bits: Option<u32>,
    pub test_mse: f64,
}

pub const BENCH_COLUMNS: [&str; 4] = ["method", "rows", "bits", "test_mse"];

/// Sketch regression on a train split, scored on the test split, for each row
/// count, followed by the OLS baseline.
///
/// Targets are centered on the train mean before insertion so a query landing
/// only in empty cells predicts the mean; `B` is the largest centered |y|.
pub fn regress_bench(
    train: &TabularDataset,
    test: &TabularDataset,
    bits: u32,
    rows: &[usize],
    estimator: Estimator,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    let y = train.y()?;
    let y_test = test.y()?;
    if y.is_empty() || y_test.is_empty() {
        return Err(Error::Config("regress-bench needs non-empty train and test splits".into()));
    }
    let center = y.iter().sum::<f64>() / y.len() as f64;
    let bound = y.iter().map(|v| (v - center).abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let spec = LshFamilySpec::srp(bits, train.n_features(), stream_seed(seed, Stream::Hashing))?;
    let mut out = Vec::with_capacity(rows.len() + 1);
    for &r in rows {
        let config = NwConfig { rows: r, y_bound: bound, estimator };
        let mut sketch = NwSketch::new(spec, config)?;
        for (x, v) in train.rows().zip(y) {
            if x.iter().any(|c| *c != 0.0) {
                sketch.insert(x, v - center)?;
            }
        }
        let pred = predict_all(&sketch, test, center)?;
        out.push(BenchRow { method: "nws".into(), rows: Some(r), bits: Some(bits), test_mse: mse(&pred, y_test)? });
    }
    let ols = fit_linear_regression(train)?;
    out.push(BenchRow { method: "ols".into(), rows: None, bits: None, test_mse: ols.mse(test)? });
    Ok(out)
}

fn predict_all(sketch: &NwSketch, data: &TabularDataset, offset: f64) -> Result<Vec<f64>> {
    data.rows()
        .map(|x| {
            if x.iter().all(|c| *c == 0.0) {
                Ok(offset)
            } else {
                Ok(sketch.query(x)? + offset)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErrorStudyConfig {
    pub kind: RegressionKind,
    pub bits: u32,
    pub rows: Vec<usize>,
    pub delta: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub dim: usize,
    pub noise: f64,
    /// Independent hash-function draws per row count.
    pub seeds: usize,
    pub estimator: Estimator,
}

impl Default for ErrorStudyConfig {
    fn default() -> Self {
        ErrorStudyConfig {
            kind: RegressionKind::SmoothAngular,
            bits: 10,
            rows: vec![10, 20, 50, 100, 200, 800],
            delta: 0.01,
            n_train: 1000,
            n_test: 200,
            dim: 3,
            noise: 0.1,
            seeds: 10,
            estimator: Estimator::Mean,
        }
    }
}

impl ErrorStudyConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.kind.bound().is_none() {
            return bad("error-study needs a bounded synthetic task (smooth-angular or step)");
        }
        if self.rows.is_empty() || self.rows.contains(&0) {
            return bad("row counts must be a non-empty list of positive integers");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta must be in (0, 1)");
        }
        if self.n_train == 0 || self.n_test == 0 || self.dim == 0 || self.seeds == 0 {
            return bad("n-train, n-test, dim and seeds must all be positive");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad("noise must be finite and non-negative");
        }
        for &r in &self.rows {
            self.estimator.validate(r)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub rows: usize,
    pub p50: f64,
    pub p99: f64,
    pub bound: f64,
}

pub const ERROR_COLUMNS: [&str; 4] = ["rows", "p50", "p99", "bound"];

/// Absolute error of the sketch against the exact kernel regressor, pooled
/// over test queries and hash seeds, per row count.
///
/// The data set is drawn once; each seed draws fresh hash functions.
pub fn error_study(cfg: &ErrorStudyConfig, seed: u64) -> Result<Vec<ErrorRow>> {
    cfg.validate()?;
    let b = cfg.kind.bound().expect("validated");
    let data = synth_regression(cfg.kind, cfg.n_train + cfg.n_test, cfg.dim, cfg.noise, stream_seed(seed, Stream::Synthesis))?;
    let train = data.subset(&(0..cfg.n_train).collect::<Vec<_>>());
    let test = data.subset(&(cfg.n_train..data.len()).collect::<Vec<_>>());
    let y = train.y()?;
    let hashing = stream_seed(seed, Stream::Hashing);

    let oracle_spec = LshFamilySpec::srp(cfg.bits, cfg.dim, hashing)?;
    let mut oracle = NwExactOracle::new(oracle_spec, b)?;
    for (x, v) in train.rows().zip(y) {
        oracle.insert(x, *v)?;
    }
    let truth: Vec<f64> = test.rows().map(|q| oracle.predict(q)).collect::<std::result::Result<_, _>>()?;

    let mut out = Vec::with_capacity(cfg.rows.len());
    for &r in &cfg.rows {
        let mut errors = Vec::with_capacity(cfg.seeds * test.len());
        for s in 0..cfg.seeds {
            let spec = LshFamilySpec::srp(cfg.bits, cfg.dim, child_seed(hashing, s as u64))?;
            let config = NwConfig { rows: r, y_bound: b, estimator: cfg.estimator };
            let sketch = NwSketch::construct(train.rows().zip(y.iter().copied()), spec, config)?;
            for (q, t) in test.rows().zip(&truth) {
                errors.push((sketch.query(q)? - t).abs());
            }
        }
        let p50 = percentile(&mut errors, 50.0)?;
        let p99 = percentile(&mut errors, 99.0)?;
        out.push(ErrorRow { rows: r, p50, p99, bound: error_bound(b, cfg.delta, r) });
    }
    Ok(out)
}

pub struct DemoOutcome {
    pub baseline: TrainRun,
    pub adaptive: TrainRun,
    pub report: ComparisonReport,
}

/// Baseline and adaptive runs on the same split and batch order.
pub fn train_demo(cfg: &RunConfig, clock: &mut dyn Clock) -> Result<DemoOutcome> {
    cfg.validate()?;
    let spec = cfg.data.spec()?;
    let csv = cfg.data.csv_options(TaskKind::Classification);
    let (train, test) = prepare(&spec, &csv, cfg.data.train_fraction, cfg.data.standardize, cfg.train.seed)?;
    let baseline = run_baseline(&cfg.train, &train, &test, clock)?;
    let adaptive = run_adaptive(&cfg.train, &train, &test, clock)?;
    let report = compare_runs(&baseline, &adaptive)?;
    Ok(DemoOutcome { baseline, adaptive, report })
}
