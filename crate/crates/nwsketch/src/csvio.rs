//! Delimited-text ingestion and export of tabular datasets.

use std::path::Path;

use nwsketch_core::data::{TabularDataset, Targets};

use crate::error::{io_err, Error, Result};

/// Which column holds the target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TargetColumn {
    Index(usize),
    /// Header name; requires a header row.
    Name(String),
    /// The right-most column.
    Last,
}

impl std::str::FromStr for TargetColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "last" | "-1" => TargetColumn::Last,
            _ => match s.parse::<usize>() {
                Ok(i) => TargetColumn::Index(i),
                Err(_) => TargetColumn::Name(s.to_string()),
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TaskKind {
    #[default]
    Regression,
    /// Targets must be non-negative integers.
    Classification,
}

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub target: TargetColumn,
    pub has_header: bool,
    pub delimiter: u8,
    pub task: TaskKind,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions { target: TargetColumn::Last, has_header: true, delimiter: b',', task: TaskKind::Regression }
    }
}

/// Loads a numeric CSV: every non-target column becomes a feature, in order.
///
/// Row numbers in diagnostics are 1-based file lines.
pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<TabularDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .delimiter(opts.delimiter)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(file);
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };

    let header: Option<Vec<String>> = if opts.has_header {
        Some(reader.headers().map_err(csv_err)?.iter().map(str::to_string).collect())
    } else {
        None
    };

    let mut target_idx: Option<usize> = None;
    let mut n_cols = header.as_ref().map(Vec::len);
    let mut features = Vec::new();
    let mut reals = Vec::new();
    let mut labels = Vec::new();
    let first_line = if opts.has_header { 2 } else { 1 };

    for (i, record) in reader.records().enumerate() {
        let line = first_line + i;
        let record = record.map_err(csv_err)?;
        let width = *n_cols.get_or_insert(record.len());
        if width < 2 {
            return Err(Error::Data { path: path.to_path_buf(), message: "need at least one feature and one target column".into() });
        }
        let t = match target_idx {
            Some(t) => t,
            None => {
                let t = resolve_target(&opts.target, header.as_deref(), width)
                    .map_err(|message| Error::Data { path: path.to_path_buf(), message })?;
                target_idx = Some(t);
                t
            }
        };
        for (c, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row: line,
                column: c,
                message: format!("{cell:?} is not a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse { path: path.to_path_buf(), row: line, column: c, message: "non-finite value".into() });
            }
            if c == t {
                match opts.task {
                    TaskKind::Regression => reals.push(value),
                    TaskKind::Classification => {
                        if value < 0.0 || value.fract() != 0.0 {
                            return Err(Error::Parse {
                                path: path.to_path_buf(),
                                row: line,
                                column: c,
                                message: format!("class label {cell:?} is not a non-negative integer"),
                            });
                        }
                        labels.push(value as usize);
                    }
                }
            } else {
                features.push(value);
            }
        }
    }
    let Some(width) = n_cols.filter(|_| target_idx.is_some()) else {
        return Err(Error::Data { path: path.to_path_buf(), message: "file has no data rows".into() });
    };
    let targets = match opts.task {
        TaskKind::Regression => Targets::Regression(reals),
        TaskKind::Classification => Targets::Labels(labels),
    };
    Ok(TabularDataset::new(features, width - 1, targets)?)
}

fn resolve_target(target: &TargetColumn, header: Option<&[String]>, width: usize) -> std::result::Result<usize, String> {
    match target {
        TargetColumn::Last => Ok(width - 1),
        TargetColumn::Index(i) if *i < width => Ok(*i),
        TargetColumn::Index(i) => Err(format!("target column {i} out of range (file has {width} columns)")),
        TargetColumn::Name(name) => header
            .ok_or_else(|| format!("target column {name:?} given by name but the file has no header"))?
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| format!("no column named {name:?}")),
    }
}

/// Writes features then the target as the last column. Floats use Rust's
/// shortest round-trip formatting, so reloading is bit-exact.
pub fn write_csv(data: &TabularDataset, path: impl AsRef<Path>, header: bool) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|source| Error::Csv { path: path.to_path_buf(), source })?;
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let d = data.n_features();
    if header {
        let mut names: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
        names.push("y".into());
        writer.write_record(&names).map_err(csv_err)?;
    }
    let targets = data.targets().as_f64();
    for (row, y) in data.rows().zip(&targets) {
        let mut fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        fields.push(match data.targets() {
            Targets::Labels(_) => (*y as usize).to_string(),
            Targets::Regression(_) => y.to_string(),
        });
        writer.write_record(&fields).map_err(csv_err)?;
    }
    writer.flush().map_err(io_err(path))?;
    Ok(())
}

/// Reads a feature-only CSV (e.g. query points); every column is a feature.
pub fn load_matrix(path: impl AsRef<Path>, has_header: bool) -> Result<(Vec<f64>, usize)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(has_header).trim(csv::Trim::All).from_reader(file);
    let first_line = if has_header { 2 } else { 1 };
    let mut values = Vec::new();
    let mut width = None;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|source| Error::Csv { path: path.to_path_buf(), source })?;
        width.get_or_insert(record.len());
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row: first_line + i,
                column: c,
                message: format!("{cell:?} is not a number"),
            })?;
            values.push(v);
        }
    }
    match width {
        Some(w) if w > 0 => Ok((values, w)),
        _ => Err(Error::Data { path: path.to_path_buf(), message: "file has no data rows".into() }),
    }
}
