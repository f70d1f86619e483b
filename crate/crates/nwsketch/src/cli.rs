//! Command-line front end.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nwsketch_core::data::RegressionKind;
use nwsketch_core::rng::{stream_seed, Stream};
use nwsketch_core::trainer::{compare_records, Clock, NoClock};
use nwsketch_core::{Estimator, LshFamilySpec, NwConfig, NwSketch};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::RunConfig;
use crate::csvio::{load_matrix, CsvOptions, TargetColumn, TaskKind};
use crate::dataset::DatasetSpec;
use crate::error::{io_err, Error, Result};
use crate::experiments::{self, ErrorStudyConfig};
use crate::io::{load_nws, read_metrics, save_nws, write_json, write_metrics, Manifest};

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Parser)]
#[command(name = "nwsketch", version, about = "Nadaraya-Watson sketches and sketch-driven importance sampling")]
pub struct Cli {
    /// Root seed for every random stream of the invocation [default: 0].
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "nwsketch-out")]
    pub output: PathBuf,
    /// TOML config file; a manifest from a previous run is also accepted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a sketch snapshot from a CSV or synthetic regression data set.
    SketchBuild(SketchBuildArgs),
    /// Query a snapshot with rows of a CSV file.
    SketchQuery(SketchQueryArgs),
    /// Sketch regression vs. ordinary least squares, one row per row count.
    RegressBench(RegressBenchArgs),
    /// Empirical error quantiles against the theoretical bound.
    ErrorStudy(ErrorStudyArgs),
    /// Baseline vs. adaptive training, with metric streams and a report.
    TrainDemo(TrainDemoArgs),
    /// Compare two metric CSV files.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV path or synthesizer spec (e.g. `smooth-angular:n=2000,d=4`).
    #[arg(long)]
    pub data: String,
    /// Target column: index, header name, or `last`.
    #[arg(long, default_value = "last")]
    pub target_col: String,
    /// The CSV has no header row.
    #[arg(long)]
    pub no_header: bool,
}

impl DataArgs {
    fn options(&self) -> CsvOptions {
        CsvOptions {
            target: self.target_col.parse::<TargetColumn>().expect("infallible"),
            has_header: !self.no_header,
            delimiter: b',',
            task: TaskKind::Regression,
        }
    }
}

#[derive(Debug, Args)]
pub struct SketchBuildArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 10)]
    pub bits: u32,
    #[arg(short = 'R', long, default_value_t = 400)]
    pub rows: usize,
    /// Response bound B [default: largest |y| in the data].
    #[arg(long)]
    pub y_bound: Option<f64>,
    /// `mean`, `mom`, or `mom:<groups>`.
    #[arg(long, default_value = "mean")]
    pub estimator: String,
}

#[derive(Debug, Args)]
pub struct SketchQueryArgs {
    #[arg(long)]
    pub snapshot: PathBuf,
    /// CSV of query rows holding exactly the sketch's features.
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub no_header: bool,
}

#[derive(Debug, Args)]
pub struct RegressBenchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 10)]
    pub bits: u32,
    /// Comma-separated row counts.
    #[arg(short = 'R', long, value_delimiter = ',', default_values_t = [10, 20, 50, 100, 200])]
    pub rows: Vec<usize>,
    #[arg(long, default_value_t = 0.9)]
    pub train_fraction: f64,
    /// Skip feature standardization.
    #[arg(long)]
    pub no_standardize: bool,
    #[arg(long, default_value = "mean")]
    pub estimator: String,
}

#[derive(Debug, Args)]
pub struct ErrorStudyArgs {
    #[arg(long)]
    pub bits: Option<u32>,
    #[arg(short = 'R', long, value_delimiter = ',')]
    pub rows: Option<Vec<usize>>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    /// `smooth-angular` or `step`.
    #[arg(long)]
    pub kind: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrainDemoArgs {
    /// Record zero wall-clock time so output files are byte-reproducible.
    #[arg(long)]
    pub no_clock: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub baseline: PathBuf,
    #[arg(long)]
    pub adaptive: PathBuf,
    /// Warm-up iterations [default: from --config, else 50].
    #[arg(long)]
    pub warmup: Option<u64>,
    /// Batch size [default: from --config, else 64].
    #[arg(long)]
    pub batch_size: Option<usize>,
}

/// Parses `mean`, `mom` (default groups for `rows`) or `mom:<groups>`.
pub fn parse_estimator(s: &str, rows: usize) -> Result<Estimator> {
    let est = match s {
        "mean" => Estimator::Mean,
        "mom" => Estimator::default_mom(rows),
        other => match other.strip_prefix("mom:").map(str::parse::<usize>) {
            Some(Ok(groups)) => Estimator::MedianOfMeans { groups },
            _ => return Err(Error::Config(format!("unknown estimator {s:?}; use mean, mom or mom:<groups>"))),
        },
    };
    est.validate(rows)?;
    Ok(est)
}

/// Reads a TOML config, unwrapping the `config` table of a manifest; returns
/// the manifest seed when present.
pub fn read_config<T: DeserializeOwned>(path: &Path) -> Result<(T, Option<u64>)> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let value: toml::Value = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let (inner, seed) = match (value.get("tool"), value.get("config")) {
        (Some(_), Some(c)) => (c.clone(), value.get("seed").and_then(toml::Value::as_integer).map(|s| s as u64)),
        _ => (value, None),
    };
    let cfg = inner.try_into().map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok((cfg, seed))
}

fn write_rows<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

fn print_file(path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    print!("{text}");
    Ok(())
}

struct WallClock(Instant);

impl Clock for WallClock {
    fn now_ns(&mut self) -> u64 {
        self.0.elapsed().as_nanos() as u64
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let out = &cli.output;
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    match &cli.command {
        Command::SketchBuild(a) => sketch_build(&cli, a),
        Command::SketchQuery(a) => sketch_query(&cli, a),
        Command::RegressBench(a) => regress_bench(&cli, a),
        Command::ErrorStudy(a) => error_study(&cli, a),
        Command::TrainDemo(a) => train_demo(&cli, a),
        Command::Compare(a) => compare(&cli, a),
    }
}

fn sketch_build(cli: &Cli, a: &SketchBuildArgs) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    let spec: DatasetSpec = a.data.data.parse()?;
    let data = spec.load(seed, &a.data.options())?;
    let y = data.y()?;
    let bound = match a.y_bound {
        Some(b) => b,
        None => y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE),
    };
    let estimator = parse_estimator(&a.estimator, a.rows)?;
    let family = LshFamilySpec::srp(a.bits, data.n_features(), stream_seed(seed, Stream::Hashing))?;
    let mut sketch = NwSketch::new(family, NwConfig { rows: a.rows, y_bound: bound, estimator })?;
    let mut skipped = 0usize;
    for (x, v) in data.rows().zip(y) {
        if x.iter().all(|c| *c == 0.0) {
            skipped += 1;
            continue;
        }
        sketch.insert(x, *v)?;
    }
    let path = cli.output.join("sketch.nws");
    save_nws(&sketch, &path)?;
    Manifest::new("sketch-build", seed, sketch.config())
        .arg("data", &a.data.data)
        .arg("target_col", &a.data.target_col)
        .arg("has_header", !a.data.no_header)
        .arg("bits", a.bits)
        .arg("dim", data.n_features())
        .write(cli.output.join(MANIFEST_FILE))?;
    println!("inserted {} rows ({skipped} all-zero rows skipped) into {}", sketch.len(), path.display());
    Ok(())
}

fn sketch_query(cli: &Cli, a: &SketchQueryArgs) -> Result<()> {
    let sketch = load_nws(&a.snapshot)?;
    if let Some(seed) = cli.seed {
        if stream_seed(seed, Stream::Hashing) != sketch.spec().seed {
            return Err(Error::Config(format!(
                "snapshot {} was not built with --seed {seed}",
                a.snapshot.display()
            )));
        }
    }
    let (values, width) = load_matrix(&a.queries, !a.no_header)?;
    let dim = sketch.spec().dim;
    if width != dim {
        return Err(Error::Data {
            path: a.queries.clone(),
            message: format!("query rows have {width} columns but the sketch expects {dim}"),
        });
    }
    let path = cli.output.join("estimates.csv");
    let csv_err = |source| Error::Csv { path: path.clone(), source };
    let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
    w.write_record(["estimate"]).map_err(csv_err)?;
    for q in values.chunks(dim.max(1)) {
        let est = if q.iter().all(|c| *c == 0.0) { 0.0 } else { sketch.query(q)? };
        w.write_record([est.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(&path))?;
    Manifest::new("sketch-query", cli.seed.unwrap_or(0), sketch.config())
        .arg("snapshot", a.snapshot.display())
        .arg("queries", a.queries.display())
        .arg("has_header", !a.no_header)
        .write(cli.output.join(MANIFEST_FILE))?;
    println!("wrote {} estimates to {}", values.len() / dim.max(1), path.display());
    Ok(())
}

fn regress_bench(cli: &Cli, a: &RegressBenchArgs) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    if a.rows.is_empty() {
        return Err(Error::Config("-R needs at least one row count".into()));
    }
    let fewest = a.rows.iter().copied().min().unwrap_or(1);
    let estimator = parse_estimator(&a.estimator, fewest)?;
    let spec: DatasetSpec = a.data.data.parse()?;
    let (train, test) = experiments::prepare(&spec, &a.data.options(), a.train_fraction, !a.no_standardize, seed)?;
    let rows = experiments::regress_bench(&train, &test, a.bits, &a.rows, estimator, seed)?;
    let path = cli.output.join("regress_bench.csv");
    write_rows(&rows, &path)?;
    Manifest::new("regress-bench", seed, toml::Table::new())
        .arg("data", &a.data.data)
        .arg("target_col", &a.data.target_col)
        .arg("has_header", !a.data.no_header)
        .arg("bits", a.bits)
        .arg("rows", a.rows.iter().map(usize::to_string).collect::<Vec<_>>().join(","))
        .arg("train_fraction", a.train_fraction)
        .arg("standardize", !a.no_standardize)
        .arg("estimator", &a.estimator)
        .write(cli.output.join(MANIFEST_FILE))?;
    print_file(&path)
}

fn error_study(cli: &Cli, a: &ErrorStudyArgs) -> Result<()> {
    let (mut cfg, manifest_seed) = match &cli.config {
        Some(p) => read_config::<ErrorStudyConfig>(p)?,
        None => (ErrorStudyConfig::default(), None),
    };
    let seed = cli.seed.or(manifest_seed).unwrap_or(0);
    if let Some(v) = a.bits {
        cfg.bits = v;
    }
    if let Some(v) = &a.rows {
        cfg.rows = v.clone();
    }
    if let Some(v) = a.delta {
        cfg.delta = v;
    }
    if let Some(v) = a.n_train {
        cfg.n_train = v;
    }
    if let Some(v) = a.n_test {
        cfg.n_test = v;
    }
    if let Some(v) = a.seeds {
        cfg.seeds = v;
    }
    if let Some(v) = a.dim {
        cfg.dim = v;
    }
    if let Some(v) = a.noise {
        cfg.noise = v;
    }
    if let Some(k) = &a.kind {
        cfg.kind = match k.as_str() {
            "smooth-angular" => RegressionKind::SmoothAngular,
            "step" => RegressionKind::Step,
            other => return Err(Error::Config(format!("error-study kind must be smooth-angular or step, got {other:?}"))),
        };
    }
    let rows = experiments::error_study(&cfg, seed)?;
    let path = cli.output.join("error_study.csv");
    write_rows(&rows, &path)?;
    Manifest::new("error-study", seed, &cfg).write(cli.output.join(MANIFEST_FILE))?;
    print_file(&path)
}

fn train_demo(cli: &Cli, a: &TrainDemoArgs) -> Result<()> {
    let (mut cfg, manifest_seed) = match &cli.config {
        Some(p) => read_config::<RunConfig>(p)?,
        None => (RunConfig::default(), None),
    };
    if let Some(s) = cli.seed.or(manifest_seed) {
        cfg.train.seed = s;
    }
    let mut wall = WallClock(Instant::now());
    let clock: &mut dyn Clock = if a.no_clock { &mut NoClock } else { &mut wall };
    let outcome = experiments::train_demo(&cfg, clock)?;
    write_metrics(&outcome.baseline.records, cli.output.join("baseline.csv"))?;
    write_metrics(&outcome.adaptive.records, cli.output.join("adaptive.csv"))?;
    write_json(&outcome.report, cli.output.join("report.json"))?;
    Manifest::new("train-demo", cfg.train.seed, &cfg)
        .arg("no_clock", a.no_clock)
        .write(cli.output.join(MANIFEST_FILE))?;
    let r = &outcome.report;
    println!(
        "baseline accuracy {:.4}, adaptive accuracy {:.4}, post-warm-up backprop fraction {:.3}",
        r.baseline_final_accuracy, r.adaptive_final_accuracy, r.adaptive_post_warmup_fraction
    );
    Ok(())
}

fn compare(cli: &Cli, a: &CompareArgs) -> Result<()> {
    let from_cfg = match &cli.config {
        Some(p) => Some(read_config::<RunConfig>(p)?.0),
        None => None,
    };
    let warmup = a.warmup.or(from_cfg.as_ref().map(|c| c.train.sampler.warmup_iters)).unwrap_or(50);
    let batch = a.batch_size.or(from_cfg.as_ref().map(|c| c.train.batch_size)).unwrap_or(64);
    let baseline = read_metrics(&a.baseline)?;
    let adaptive = read_metrics(&a.adaptive)?;
    let report = compare_records(&baseline, &adaptive, warmup, batch)?;
    let path = cli.output.join("report.json");
    write_json(&report, &path)?;
    Manifest::new("compare", cli.seed.unwrap_or(0), toml::Table::new())
        .arg("baseline", a.baseline.display())
        .arg("adaptive", a.adaptive.display())
        .arg("warmup", warmup)
        .arg("batch_size", batch)
        .write(cli.output.join(MANIFEST_FILE))?;
    print_file(&path)
}
