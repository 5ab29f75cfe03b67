//! Synthetic data streams and CSV ingestion.
//!
//! Both generators draw, per record, `u ~ U[0, 1)` then one standard normal
//! `z` from the `Data` stream of the seed, and emit `x = 10 u`,
//! `y = sin(x) + s_t z`. The i.i.d. stream uses `s_t = 0.1`; the shift stream
//! uses `0.1` up to slot [`SHIFT_SLOT`] and `0.2` after it, so the two streams
//! coincide exactly on the first 5000 slots for a given seed.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::{SeededStream, StreamPurpose};

pub const INPUT_RANGE: f64 = 10.0;
pub const BASE_NOISE_STD: f64 = 0.1;
pub const SHIFTED_NOISE_STD: f64 = 0.2;
/// Last slot generated with the base noise level.
pub const SHIFT_SLOT: usize = 5000;

#[derive(Debug, Clone, PartialEq)]
pub struct StreamRecord {
    /// 1-based slot index.
    pub t: usize,
    pub x: Vec<f64>,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NoiseProfile {
    Iid,
    Shift,
}

/// Iterator over a synthetic `y = sin(x) + noise` stream.
#[derive(Debug, Clone)]
pub struct SyntheticStream {
    rng: SeededStream,
    profile: NoiseProfile,
    next_t: usize,
    n: usize,
}

impl Iterator for SyntheticStream {
    type Item = StreamRecord;

    fn next(&mut self) -> Option<StreamRecord> {
        if self.next_t > self.n {
            return None;
        }
        let t = self.next_t;
        self.next_t += 1;
        let x = INPUT_RANGE * self.rng.uniform();
        let z = self.rng.standard_normal();
        let std = match self.profile {
            NoiseProfile::Shift if t > SHIFT_SLOT => SHIFTED_NOISE_STD,
            _ => BASE_NOISE_STD,
        };
        Some(StreamRecord {
            t,
            x: vec![x],
            y: x.sin() + std * z,
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.n + 1).saturating_sub(self.next_t);
        (left, Some(left))
    }
}

impl ExactSizeIterator for SyntheticStream {}

/// `n` records of `y = sin(x) + N(0, 0.1^2)`, `x ~ U(0, 10)`.
pub fn gen_iid(n: usize, seed: u64) -> SyntheticStream {
    SyntheticStream {
        rng: SeededStream::new(seed, StreamPurpose::Data),
        profile: NoiseProfile::Iid,
        next_t: 1,
        n,
    }
}

/// Like [`gen_iid`] but with noise std 0.2 after slot 5000.
pub fn gen_shift(n: usize, seed: u64) -> SyntheticStream {
    SyntheticStream {
        profile: NoiseProfile::Shift,
        ..gen_iid(n, seed)
    }
}

/// Column selection for [`load_csv`].
#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    pub feature_columns: Vec<String>,
    pub target_column: String,
    pub delimiter: u8,
}

impl Default for CsvSchema {
    /// Open/high/low prices as features, close as the target.
    fn default() -> Self {
        Self {
            feature_columns: vec!["open".into(), "high".into(), "low".into()],
            target_column: "close".into(),
            delimiter: b',',
        }
    }
}

/// Loads an ordered stream from a headered CSV. Rows are numbered from 1 for
/// the first data row, in file order.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Vec<StreamRecord>> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    if schema.feature_columns.is_empty() {
        return Err(Error::InvalidParameter("at least one feature column is required".into()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    let column_index = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_string(),
            })
    };
    let feature_idx = schema
        .feature_columns
        .iter()
        .map(|c| column_index(c))
        .collect::<Result<Vec<_>>>()?;
    let target_idx = column_index(&schema.target_column)?;

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| Error::MalformedRow {
            path: path.to_path_buf(),
            row: row_no,
            message: e.to_string(),
        })?;
        let cell = |idx: usize, column: &str| -> Result<f64> {
            let raw = row.get(idx).unwrap_or("");
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::NonNumeric {
                    path: path.to_path_buf(),
                    row: row_no,
                    column: column.to_string(),
                    value: raw.to_string(),
                }),
            }
        };
        let x = feature_idx
            .iter()
            .zip(&schema.feature_columns)
            .map(|(&idx, name)| cell(idx, name))
            .collect::<Result<Vec<_>>>()?;
        let y = cell(target_idx, &schema.target_column)?;
        records.push(StreamRecord { t: row_no, x, y });
    }
    if records.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    Ok(records)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::MalformedRow {
            path: path.to_path_buf(),
            row: 0,
            message: format!("{other:?}"),
        },
    }
}

/// Writes records with the given column names (features then target).
pub fn write_csv(
    records: &[StreamRecord],
    path: impl AsRef<Path>,
    feature_columns: &[&str],
    target_column: &str,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str(&feature_columns.join(","));
    out.push(',');
    out.push_str(target_column);
    out.push('\n');
    for r in records {
        if r.x.len() != feature_columns.len() {
            return Err(Error::DimensionMismatch {
                expected: feature_columns.len(),
                got: r.x.len(),
            });
        }
        for v in &r.x {
            out.push_str(&v.to_string());
            out.push(',');
        }
        out.push_str(&r.y.to_string());
        out.push('\n');
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
