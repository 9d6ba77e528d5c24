//! Prediction-interval datasets: validation, ingestion and normalization.
//!
//! Records are stored in band form: a point prediction `y_hat` with
//! nonnegative deviates `z_lower` / `z_upper`, so the interval is
//! `[y_hat - z_lower, y_hat + z_upper]`. Absolute bounds are accepted on
//! ingestion and converted.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("non-finite value in record {index}, field `{field}`")]
    NonFiniteValue { index: usize, field: &'static str },
    #[error("negative band in record {0}")]
    NegativeBand(usize),
    #[error("column lengths differ: {0:?}")]
    LengthMismatch([usize; 4]),
    #[error("bounds out of order in record {0} (need lower <= y_hat <= upper)")]
    BoundOrderViolation(usize),
    #[error("parse error on line {line}: {message}")]
    ParseError { line: u64, message: String },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("standard deviation of the targets is zero")]
    ZeroVariance,
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// One observation with its prediction interval in band form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub y: f64,
    pub y_hat: f64,
    pub z_lower: f64,
    pub z_upper: f64,
}

impl PredictionRecord {
    pub fn new(y: f64, y_hat: f64, z_lower: f64, z_upper: f64) -> Self {
        Self {
            y,
            y_hat,
            z_lower,
            z_upper,
        }
    }

    /// Signed observed error `y - y_hat`.
    pub fn error(&self) -> f64 {
        self.y - self.y_hat
    }

    pub fn lower_bound(&self, k: f64) -> f64 {
        self.y_hat - k * self.z_lower
    }

    pub fn upper_bound(&self, k: f64) -> f64 {
        self.y_hat + k * self.z_upper
    }

    /// Smallest scale at which this record's interval contains `y`.
    ///
    /// Only the band on the side of the error matters. A zero error gives
    /// 0 (even against a zero band); a nonzero error against a zero band
    /// can never be captured and gives `+inf`.
    pub fn critical_scale(&self) -> f64 {
        let z = self.error();
        if z == 0.0 {
            return 0.0;
        }
        let band = if z > 0.0 { self.z_upper } else { self.z_lower };
        if band == 0.0 {
            f64::INFINITY
        } else {
            z.abs() / band
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.z_lower == self.z_upper
    }

    fn check(&self, index: usize) -> Result<(), DataError> {
        for (field, v) in [
            ("y", self.y),
            ("y_hat", self.y_hat),
            ("z_lower", self.z_lower),
            ("z_upper", self.z_upper),
        ] {
            if !v.is_finite() {
                return Err(DataError::NonFiniteValue { index, field });
            }
        }
        if self.z_lower < 0.0 || self.z_upper < 0.0 {
            return Err(DataError::NegativeBand(index));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Normalization {
    None,
    /// All values divided by the population standard deviation of `y`.
    StdUnits { divisor: f64 },
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Normalization::None => f.write_str("none"),
            Normalization::StdUnits { .. } => f.write_str("std"),
        }
    }
}

/// Column layout of a tabular input file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnMode {
    /// `y,y_hat,z_lower,z_upper`
    Bands,
    /// `y,y_hat,lower,upper`
    Bounds,
}

impl ColumnMode {
    fn columns(self) -> [&'static str; 4] {
        match self {
            ColumnMode::Bands => ["y", "y_hat", "z_lower", "z_upper"],
            ColumnMode::Bounds => ["y", "y_hat", "lower", "upper"],
        }
    }
}

/// A validated, immutable, nonempty set of prediction records.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    records: Vec<PredictionRecord>,
    normalization: Normalization,
    mean_half_width: f64,
    /// Original `(lower, upper)` when built from absolute bounds, since
    /// `y_hat - (y_hat - lower)` need not round back to `lower`.
    source_bounds: Option<Vec<(f64, f64)>>,
}

impl Dataset {
    /// Validates `records` and builds a dataset. Reports the first bad record.
    pub fn validate(records: Vec<PredictionRecord>) -> Result<Self, DataError> {
        Self::with_name("dataset", records)
    }

    pub fn with_name(
        name: impl Into<String>,
        records: Vec<PredictionRecord>,
    ) -> Result<Self, DataError> {
        if records.is_empty() {
            return Err(DataError::EmptyDataset);
        }
        for (i, r) in records.iter().enumerate() {
            r.check(i)?;
        }
        Ok(Self::assemble(name.into(), records, Normalization::None))
    }

    fn assemble(name: String, records: Vec<PredictionRecord>, normalization: Normalization) -> Self {
        let sum: f64 = records.iter().map(|r| r.z_lower + r.z_upper).sum();
        let mean_half_width = sum / (2.0 * records.len() as f64);
        Self {
            name,
            records,
            normalization,
            mean_half_width,
            source_bounds: None,
        }
    }

    /// Builds a dataset from absolute bounds `lower <= y_hat <= upper`.
    pub fn from_bounds(
        y: &[f64],
        y_hat: &[f64],
        lower: &[f64],
        upper: &[f64],
    ) -> Result<Self, DataError> {
        let lens = [y.len(), y_hat.len(), lower.len(), upper.len()];
        if lens.iter().any(|&l| l != lens[0]) {
            return Err(DataError::LengthMismatch(lens));
        }
        let mut records = Vec::with_capacity(y.len());
        for i in 0..y.len() {
            let r = PredictionRecord::new(y[i], y_hat[i], y_hat[i] - lower[i], upper[i] - y_hat[i]);
            // Report non-finite inputs before ordering problems.
            for (field, v) in [("y", y[i]), ("y_hat", y_hat[i]), ("lower", lower[i]), ("upper", upper[i])] {
                if !v.is_finite() {
                    return Err(DataError::NonFiniteValue { index: i, field });
                }
            }
            if !(lower[i] <= y_hat[i] && y_hat[i] <= upper[i]) {
                return Err(DataError::BoundOrderViolation(i));
            }
            records.push(r);
        }
        let mut ds = Self::validate(records)?;
        ds.source_bounds = Some(lower.iter().copied().zip(upper.iter().copied()).collect());
        Ok(ds)
    }

    /// Absolute `(lower, upper)` bounds at scale 1. Exact originals for a
    /// dataset built by [`Dataset::from_bounds`].
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        match &self.source_bounds {
            Some(b) => b.clone(),
            None => self
                .records
                .iter()
                .map(|r| (r.lower_bound(1.0), r.upper_bound(1.0)))
                .collect(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn records(&self) -> &[PredictionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// Always false; a dataset holds at least one record.
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    /// Mean of `(z_lower + z_upper) / 2`, i.e. the bandwidth at scale 1.
    pub fn mean_half_width(&self) -> f64 {
        self.mean_half_width
    }

    pub fn is_symmetric(&self) -> bool {
        self.records.iter().all(PredictionRecord::is_symmetric)
    }

    pub fn critical_scales(&self) -> Vec<f64> {
        self.records.iter().map(PredictionRecord::critical_scale).collect()
    }

    /// Same `(y, y_hat)` with new bands. The band slices must match `len()`.
    pub fn with_bands(&self, z_lower: &[f64], z_upper: &[f64]) -> Result<Self, DataError> {
        let n = self.len();
        if z_lower.len() != n || z_upper.len() != n {
            return Err(DataError::LengthMismatch([n, n, z_lower.len(), z_upper.len()]));
        }
        let records: Vec<_> = self
            .records
            .iter()
            .zip(z_lower.iter().zip(z_upper))
            .map(|(r, (&lo, &up))| PredictionRecord::new(r.y, r.y_hat, lo, up))
            .collect();
        for (i, r) in records.iter().enumerate() {
            r.check(i)?;
        }
        Ok(Self::assemble(self.name.clone(), records, self.normalization))
    }

    /// Keeps only records whose critical scale is finite. Returns the
    /// filtered dataset (if any record survives) and the number dropped.
    pub fn retain_finite_scales(&self) -> (Option<Self>, usize) {
        let kept: Vec<_> = self
            .records
            .iter()
            .copied()
            .filter(|r| r.critical_scale().is_finite())
            .collect();
        let dropped = self.len() - kept.len();
        if kept.is_empty() {
            return (None, dropped);
        }
        (
            Some(Self::assemble(self.name.clone(), kept, self.normalization)),
            dropped,
        )
    }

    /// True when both datasets have bitwise-identical `(y, y_hat)` in order.
    pub fn shares_base_with(&self, other: &Dataset) -> bool {
        self.len() == other.len()
            && self
                .records
                .iter()
                .zip(&other.records)
                .all(|(a, b)| a.y.to_bits() == b.y.to_bits() && a.y_hat.to_bits() == b.y_hat.to_bits())
    }

    /// Population standard deviation of the targets.
    pub fn target_std(&self) -> f64 {
        population_std(self.records.iter().map(|r| r.y))
    }

    /// Population standard deviation of the point predictions.
    pub fn prediction_std(&self) -> f64 {
        population_std(self.records.iter().map(|r| r.y_hat))
    }

    /// Divides every value by the population std of `y`.
    pub fn normalize_std(&self) -> Result<Self, DataError> {
        let s = self.target_std();
        if !s.is_finite() || s <= 0.0 {
            return Err(DataError::ZeroVariance);
        }
        let records = self
            .records
            .iter()
            .map(|r| PredictionRecord::new(r.y / s, r.y_hat / s, r.z_lower / s, r.z_upper / s))
            .collect();
        Ok(Self::assemble(
            self.name.clone(),
            records,
            Normalization::StdUnits { divisor: s },
        ))
    }

    pub fn load_csv(path: impl AsRef<Path>, mode: ColumnMode) -> Result<Self, DataError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| io_err(path, e))?;
        Self::read_csv(file, mode).map(|d| d.renamed(stem(path)))
    }

    /// Like [`Dataset::load_csv`] but picks the column mode from the header.
    pub fn load_csv_auto(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref();
        let mut text = String::new();
        File::open(path)
            .and_then(|mut f| f.read_to_string(&mut text))
            .map_err(|e| io_err(path, e))?;
        let header = text
            .lines()
            .find(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty())
            .unwrap_or("");
        let mode = if header.split(',').any(|c| c.trim() == "lower") {
            ColumnMode::Bounds
        } else {
            ColumnMode::Bands
        };
        Self::read_csv(text.as_bytes(), mode).map(|d| d.renamed(stem(path)))
    }

    pub fn read_csv<R: Read>(reader: R, mode: ColumnMode) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| DataError::ParseError {
                line: 1,
                message: e.to_string(),
            })?
            .clone();
        let names = mode.columns();
        let mut idx = [0usize; 4];
        for (slot, name) in idx.iter_mut().zip(names) {
            *slot = headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| DataError::MissingColumn(name.to_string()))?;
        }

        let mut cols: [Vec<f64>; 4] = Default::default();
        for row in rdr.records() {
            let row = row.map_err(|e| DataError::ParseError {
                line: e.position().map(|p| p.line()).unwrap_or(0),
                message: e.to_string(),
            })?;
            let line = row.position().map(|p| p.line()).unwrap_or(0);
            for (c, &i) in idx.iter().enumerate() {
                let field = row.get(i).unwrap_or("");
                let v: f64 = field.parse().map_err(|_| DataError::ParseError {
                    line,
                    message: format!("`{field}` is not a number (column `{}`)", names[c]),
                })?;
                cols[c].push(v);
            }
        }
        match mode {
            ColumnMode::Bounds => Self::from_bounds(&cols[0], &cols[1], &cols[2], &cols[3]),
            ColumnMode::Bands => {
                let records = (0..cols[0].len())
                    .map(|i| PredictionRecord::new(cols[0][i], cols[1][i], cols[2][i], cols[3][i]))
                    .collect();
                Self::validate(records)
            }
        }
    }

    /// Writes the dataset in band form (`y,y_hat,z_lower,z_upper`).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DataError> {
        self.write_csv_with_comments(writer, &[])
    }

    pub fn write_csv_with_comments<W: Write>(
        &self,
        mut writer: W,
        comments: &[String],
    ) -> Result<(), DataError> {
        let io = |e: std::io::Error| DataError::Io {
            path: "<output>".into(),
            message: e.to_string(),
        };
        for c in comments {
            writeln!(writer, "# {c}").map_err(io)?;
        }
        writeln!(writer, "y,y_hat,z_lower,z_upper").map_err(io)?;
        for r in &self.records {
            writeln!(writer, "{},{},{},{}", r.y, r.y_hat, r.z_lower, r.z_upper).map_err(io)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| io_err(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Reads a JSON array of objects keyed like the CSV columns.
    pub fn read_json(text: &str, mode: ColumnMode) -> Result<Self, DataError> {
        let rows: Vec<serde_json::Map<String, serde_json::Value>> =
            serde_json::from_str(text).map_err(|e| DataError::ParseError {
                line: e.line() as u64,
                message: e.to_string(),
            })?;
        let names = mode.columns();
        let mut cols: [Vec<f64>; 4] = Default::default();
        for (i, row) in rows.iter().enumerate() {
            for (c, name) in names.iter().enumerate() {
                let v = row
                    .get(*name)
                    .ok_or_else(|| DataError::MissingColumn(name.to_string()))?;
                let v = v.as_f64().ok_or_else(|| DataError::ParseError {
                    line: i as u64 + 1,
                    message: format!("`{name}` is not a number in element {i}"),
                })?;
                cols[c].push(v);
            }
        }
        match mode {
            ColumnMode::Bounds => Self::from_bounds(&cols[0], &cols[1], &cols[2], &cols[3]),
            ColumnMode::Bands => Self::validate(
                (0..cols[0].len())
                    .map(|i| PredictionRecord::new(cols[0][i], cols[1][i], cols[2][i], cols[3][i]))
                    .collect(),
            ),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.records).expect("records serialize")
    }

    /// Loads CSV or JSON (by extension), detecting the column mode when
    /// `mode` is `None`.
    pub fn load(path: impl AsRef<Path>, mode: Option<ColumnMode>) -> Result<Self, DataError> {
        let path = path.as_ref();
        let is_json = path
            .extension()
            .map(|e| e.eq_ignore_ascii_case("json"))
            .unwrap_or(false);
        if is_json {
            let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            let mode = mode.unwrap_or_else(|| {
                if text.contains("\"lower\"") {
                    ColumnMode::Bounds
                } else {
                    ColumnMode::Bands
                }
            });
            return Self::read_json(&text, mode).map(|d| d.renamed(stem(path)));
        }
        match mode {
            Some(m) => Self::load_csv(path, m),
            None => Self::load_csv_auto(path),
        }
    }
}

fn population_std(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        return 0.0;
    }
    let mean = sum / n as f64;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (ss / n as f64).sqrt()
}

fn io_err(path: &Path, e: std::io::Error) -> DataError {
    DataError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}
