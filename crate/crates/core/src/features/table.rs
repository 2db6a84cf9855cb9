use std::collections::HashSet;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::ingest::{parse_date, DepthBin};
use crate::matrix::Matrix;

use super::indices::is_index_column;
use super::sets::ReflectanceSet;

pub const TARGET_COLUMN: &str = "Chl";

/// Row identity: a buoy sample or a raster pixel.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RowKey {
    Sample { date: NaiveDate, buoy: String },
    Pixel { row: usize, col: usize },
}

/// `<set>_<w>x<w>`, e.g. `C2X-Complex_rhow_9x9` or `TOA_15x15`.
pub fn dataset_stem(set: ReflectanceSet, w: usize) -> String {
    format!("{set}_{w}x{w}")
}

/// `<set>_<w>x<w>_depth_in_<a>_<b>`.
pub fn dataset_id(set: ReflectanceSet, w: usize, bin: DepthBin) -> String {
    format!("{}_depth_in_{}", dataset_stem(set, w), bin.slug())
}

/// Splits a dataset id back into its parts.
pub fn parse_dataset_id(id: &str) -> Result<(ReflectanceSet, usize, DepthBin)> {
    let bad = || Error::Parse(format!("malformed dataset id {id:?}"));
    let (stem, depth) = id.split_once("_depth_in_").ok_or_else(bad)?;
    let bin = DepthBin::parse(depth)?;
    let (set, window) = parse_dataset_stem(stem).map_err(|_| bad())?;
    Ok((set, window, bin))
}

pub fn parse_dataset_stem(stem: &str) -> Result<(ReflectanceSet, usize)> {
    let bad = || Error::Parse(format!("malformed dataset name {stem:?}"));
    let (set, win) = stem.rsplit_once('_').ok_or_else(bad)?;
    let (a, b) = win.split_once('x').ok_or_else(bad)?;
    let w: usize = a.parse().map_err(|_| bad())?;
    if b.parse::<usize>().ok() != Some(w) {
        return Err(bad());
    }
    Ok((ReflectanceSet::parse(set)?, w))
}

/// Keyed rows of feature values with an optional target column.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub dataset_id: String,
    columns: Vec<String>,
    keys: Vec<RowKey>,
    values: Matrix,
    target: Option<Vec<f64>>,
    /// Rows discarded during assembly because of NaN features or target.
    pub dropped_rows: usize,
}

impl FeatureTable {
    pub fn new(
        dataset_id: impl Into<String>,
        columns: Vec<String>,
        keys: Vec<RowKey>,
        values: Matrix,
        target: Option<Vec<f64>>,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &columns {
            if c == TARGET_COLUMN || !seen.insert(c.as_str()) {
                return Err(Error::Integrity(format!("feature column {c:?} is duplicated or reserved")));
            }
        }
        if values.nrows() != keys.len() || values.ncols() != columns.len() {
            return Err(Error::Integrity(format!(
                "{} keys and {} columns do not fit a {}x{} value block",
                keys.len(),
                columns.len(),
                values.nrows(),
                values.ncols()
            )));
        }
        if target.as_ref().is_some_and(|t| t.len() != keys.len()) {
            return Err(Error::Integrity("target length differs from row count".into()));
        }
        Ok(Self { dataset_id: dataset_id.into(), columns, keys, values, target, dropped_rows: 0 })
    }

    pub fn n_rows(&self) -> usize {
        self.keys.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn keys(&self) -> &[RowKey] {
        &self.keys
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn target(&self) -> Option<&[f64]> {
        self.target.as_deref()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        self.column_index(name).map(|i| self.values.column(i))
    }

    /// Column positions of raw band means.
    pub fn raw_columns(&self) -> Vec<usize> {
        (0..self.columns.len()).filter(|&i| !is_index_column(&self.columns[i])).collect()
    }

    pub fn index_columns(&self) -> Vec<usize> {
        (0..self.columns.len()).filter(|&i| is_index_column(&self.columns[i])).collect()
    }

    /// Values of the named columns, in that order; unknown names are a contract error.
    pub fn select(&self, names: &[String]) -> Result<Matrix> {
        let idx = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| Error::Contract(format!("table {} has no column {n}", self.dataset_id)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.values.select_cols(&idx))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        self.write_to(&mut out).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# dataset_id={}", self.dataset_id).map_err(|e| Error::io("<stream>", e))?;
        if self.dropped_rows > 0 {
            writeln!(out, "# dropped_rows={}", self.dropped_rows).map_err(|e| Error::io("<stream>", e))?;
        }
        let mut w = csv::Writer::from_writer(out);
        let pixel = matches!(self.keys.first(), Some(RowKey::Pixel { .. }));
        let mut header: Vec<&str> = if pixel { vec!["Row", "Col"] } else { vec!["Date", "Buoy"] };
        header.extend(self.columns.iter().map(String::as_str));
        if self.target.is_some() {
            header.push(TARGET_COLUMN);
        }
        w.write_record(&header)?;
        let mut rec: Vec<String> = Vec::with_capacity(header.len());
        for (i, key) in self.keys.iter().enumerate() {
            rec.clear();
            match key {
                RowKey::Sample { date, buoy } => {
                    rec.push(date.format("%Y-%m-%d").to_string());
                    rec.push(buoy.clone());
                }
                RowKey::Pixel { row, col } => {
                    rec.push(row.to_string());
                    rec.push(col.to_string());
                }
            }
            rec.extend(self.values.row(i).iter().map(|v| v.to_string()));
            if let Some(t) = &self.target {
                rec.push(t[i].to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<stream>", e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingInput(format!("feature table {} does not exist", path.display())));
        }
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file))
    }

    pub fn read_from<R: BufRead>(mut input: R) -> Result<Self> {
        let mut dataset_id = String::new();
        let mut dropped_rows = 0usize;
        let mut line = String::new();
        let mut header_line = String::new();
        loop {
            line.clear();
            if input.read_line(&mut line).map_err(|e| Error::io("<stream>", e))? == 0 {
                break;
            }
            let Some(comment) = line.trim_end().strip_prefix('#') else {
                header_line = line.clone();
                break;
            };
            let comment = comment.trim();
            if let Some(id) = comment.strip_prefix("dataset_id=") {
                dataset_id = id.to_string();
            } else if let Some(n) = comment.strip_prefix("dropped_rows=") {
                dropped_rows = n.parse().map_err(|_| Error::Parse(format!("bad dropped_rows {n:?}")))?;
            }
        }
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(std::io::Cursor::new(header_line).chain(input));
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let pixel = match header.get(..2) {
            Some([a, b]) if a == "Date" && b == "Buoy" => false,
            Some([a, b]) if a == "Row" && b == "Col" => true,
            _ => return Err(Error::Schema("feature table must start with Date,Buoy or Row,Col".into())),
        };
        let has_target = header.last().map(String::as_str) == Some(TARGET_COLUMN);
        let end = header.len() - usize::from(has_target);
        let columns = header[2..end].to_vec();
        let (mut keys, mut data, mut target) = (Vec::new(), Vec::new(), Vec::new());
        let num = |s: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number {s:?}")))
        };
        for rec in r.records() {
            let rec = rec?;
            keys.push(if pixel {
                let idx = |s: &str| s.trim().parse::<usize>().map_err(|_| Error::Parse(format!("bad pixel index {s:?}")));
                RowKey::Pixel { row: idx(&rec[0])?, col: idx(&rec[1])? }
            } else {
                RowKey::Sample { date: parse_date(&rec[0])?, buoy: rec[1].to_string() }
            });
            for v in rec.iter().take(end).skip(2) {
                data.push(num(v)?);
            }
            if has_target {
                target.push(num(&rec[end])?);
            }
        }
        let values = Matrix::new(keys.len(), columns.len(), data)?;
        let mut t = Self::new(dataset_id, columns, keys, values, has_target.then_some(target))?;
        t.dropped_rows = dropped_rows;
        Ok(t)
    }
}
