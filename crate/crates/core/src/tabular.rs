//! Column-typed in-memory tables: CSV ingestion, auditing and descriptive
//! statistics.
//!
//! Categorical levels are kept in sorted order so that level codes, one-hot
//! layouts and "first level" rules do not depend on row order.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

/// Per-column kind hints for [`load_csv`]. Columns without a hint are inferred.
pub type SchemaHint = HashMap<String, ColumnKind>;

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<Option<f64>>),
    Categorical {
        codes: Vec<Option<u32>>,
        levels: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

impl Column {
    pub fn numeric(name: impl Into<String>, values: Vec<Option<f64>>) -> Self {
        Self {
            name: name.into(),
            data: ColumnData::Numeric(values),
        }
    }

    /// Numeric column without missing values.
    pub fn dense(name: impl Into<String>, values: &[f64]) -> Self {
        Self::numeric(name, values.iter().map(|&v| Some(v)).collect())
    }

    /// Categorical column from raw strings; `None` marks a missing cell.
    pub fn categorical<S: AsRef<str>>(name: impl Into<String>, values: &[Option<S>]) -> Self {
        let mut levels: Vec<String> = values
            .iter()
            .flatten()
            .map(|s| s.as_ref().to_string())
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        levels.sort();
        let lookup: HashMap<&str, u32> = levels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i as u32))
            .collect();
        let codes = values
            .iter()
            .map(|v| v.as_ref().map(|s| lookup[s.as_ref()]))
            .collect();
        Self {
            name: name.into(),
            data: ColumnData::Categorical { codes, levels },
        }
    }

    pub fn len(&self) -> usize {
        match &self.data {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> ColumnKind {
        match self.data {
            ColumnData::Numeric(_) => ColumnKind::Numeric,
            ColumnData::Categorical { .. } => ColumnKind::Categorical,
        }
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match &self.data {
            ColumnData::Numeric(v) => v[row].is_none(),
            ColumnData::Categorical { codes, .. } => codes[row].is_none(),
        }
    }

    pub fn missing_count(&self) -> usize {
        (0..self.len()).filter(|&i| self.is_missing(i)).count()
    }

    pub fn as_numeric(&self) -> Option<&[Option<f64>]> {
        match &self.data {
            ColumnData::Numeric(v) => Some(v),
            ColumnData::Categorical { .. } => None,
        }
    }

    /// Text of a cell as it would be written to CSV; empty for missing.
    pub fn cell_text(&self, row: usize) -> String {
        match &self.data {
            ColumnData::Numeric(v) => v[row].map(format_number).unwrap_or_default(),
            ColumnData::Categorical { codes, levels } => codes[row]
                .map(|c| levels[c as usize].clone())
                .unwrap_or_default(),
        }
    }

    fn select_rows(&self, idx: &[usize]) -> Column {
        let data = match &self.data {
            ColumnData::Numeric(v) => ColumnData::Numeric(idx.iter().map(|&i| v[i]).collect()),
            ColumnData::Categorical { codes, levels } => ColumnData::Categorical {
                codes: idx.iter().map(|&i| codes[i]).collect(),
                levels: levels.clone(),
            },
        };
        Column {
            name: self.name.clone(),
            data,
        }
    }

    fn row_key(&self, row: usize) -> u64 {
        // Missing is encoded with a value no finite f64 or level code produces.
        const MISSING: u64 = 0x7FF8_DEAD_BEEF_0001;
        match &self.data {
            ColumnData::Numeric(v) => v[row].map_or(MISSING, f64::to_bits),
            ColumnData::Categorical { codes, .. } => codes[row].map_or(MISSING, u64::from),
        }
    }
}

/// Shortest text that parses back to the same `f64`.
pub fn format_number(v: f64) -> String {
    format!("{v}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    columns: Vec<Column>,
    n_rows: usize,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: Vec<Column>) -> Result<Self> {
        let n_rows = columns.first().map_or(0, Column::len);
        let mut seen = HashSet::new();
        for c in &columns {
            if c.len() != n_rows {
                return Err(Error::RowMismatch {
                    expected: n_rows,
                    found: c.len(),
                });
            }
            if !seen.insert(c.name.as_str()) {
                return Err(Error::DuplicateColumn(c.name.clone()));
            }
            if let ColumnData::Categorical { codes, levels } = &c.data {
                if codes.iter().flatten().any(|&k| k as usize >= levels.len()) {
                    return Err(Error::InvalidParameter(format!(
                        "column {:?} has a level code outside its level table",
                        c.name
                    )));
                }
            }
        }
        Ok(Self {
            name: name.into(),
            columns,
            n_rows,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::ColumnNotFound(name.to_string()))
    }

    pub fn numeric_column_names(&self) -> Vec<String> {
        self.columns
            .iter()
            .filter(|c| c.kind() == ColumnKind::Numeric)
            .map(|c| c.name.clone())
            .collect()
    }

    pub fn categorical_column_names(&self) -> Vec<String> {
        self.columns
            .iter()
            .filter(|c| c.kind() == ColumnKind::Categorical)
            .map(|c| c.name.clone())
            .collect()
    }

    /// Replaces the column at `index` with `replacement` (possibly several columns).
    pub fn splice(&self, index: usize, replacement: Vec<Column>) -> Result<Table> {
        let mut cols = self.columns.clone();
        cols.splice(index..=index, replacement);
        Table::new(self.name.clone(), cols)
    }

    pub fn with_column(&self, column: Column) -> Result<Table> {
        let mut cols = self.columns.clone();
        match self.column_index(&column.name) {
            Some(i) => cols[i] = column,
            None => cols.push(column),
        }
        Table::new(self.name.clone(), cols)
    }

    pub fn without_column(&self, name: &str) -> Result<Table> {
        let i = self
            .column_index(name)
            .ok_or_else(|| Error::ColumnNotFound(name.to_string()))?;
        let mut cols = self.columns.clone();
        cols.remove(i);
        Table::new(self.name.clone(), cols)
    }

    pub fn select_rows(&self, idx: &[usize]) -> Table {
        Table {
            name: self.name.clone(),
            columns: self.columns.iter().map(|c| c.select_rows(idx)).collect(),
            n_rows: idx.len(),
        }
    }

    /// Dense matrix of the named numeric columns; missing cells are an error.
    pub fn numeric_matrix(&self, names: &[String]) -> Result<Matrix> {
        let mut cols = Vec::with_capacity(names.len());
        for name in names {
            let c = self.column(name)?;
            let v = c
                .as_numeric()
                .ok_or_else(|| Error::ColumnNotNumeric(name.clone()))?;
            let missing = v.iter().filter(|x| x.is_none()).count();
            if missing > 0 {
                return Err(Error::MissingValues {
                    column: name.clone(),
                    count: missing,
                });
            }
            cols.push(v.iter().map(|x| x.unwrap_or(f64::NAN)).collect());
        }
        if cols.is_empty() {
            return Ok(Matrix::zeros(self.n_rows, 0));
        }
        Matrix::from_columns(&cols)
    }

    /// Rows where none of the named columns is missing.
    pub fn complete_rows(&self, names: &[String]) -> Result<Vec<usize>> {
        let cols = names
            .iter()
            .map(|n| self.column(n))
            .collect::<Result<Vec<_>>>()?;
        Ok((0..self.n_rows)
            .filter(|&i| cols.iter().all(|c| !c.is_missing(i)))
            .collect())
    }
}

/// Reads a CSV file with a mandatory header row.
pub fn load_csv(path: impl AsRef<Path>, schema_hint: Option<&SchemaHint>) -> Result<Table> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::FileUnreadable {
        path: path.display().to_string(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_csv(file, &name, schema_hint)
}

pub fn read_csv<R: Read>(reader: R, name: &str, schema_hint: Option<&SchemaHint>) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::EmptyInput);
    }
    let width = header.len();
    let mut raw: Vec<Vec<String>> = vec![Vec::new(); width];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != width {
            return Err(Error::RaggedRow {
                row,
                expected: width,
                found: rec.len(),
            });
        }
        for (j, field) in rec.iter().enumerate() {
            raw[j].push(field.to_string());
        }
    }
    if raw[0].is_empty() {
        return Err(Error::EmptyInput);
    }

    let mut columns = Vec::with_capacity(width);
    for (name, cells) in header.iter().zip(raw) {
        let hint = schema_hint.and_then(|h| h.get(name)).copied();
        columns.push(build_column(name, cells, hint)?);
    }
    Table::new(name, columns)
}

fn parse_cell(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

fn build_column(name: &str, cells: Vec<String>, hint: Option<ColumnKind>) -> Result<Column> {
    let is_missing = |s: &str| s.trim().is_empty();
    let kind = match hint {
        Some(k) => k,
        None => {
            if cells.iter().all(|s| is_missing(s) || parse_cell(s).is_some()) {
                ColumnKind::Numeric
            } else {
                ColumnKind::Categorical
            }
        }
    };
    match kind {
        ColumnKind::Numeric => {
            let mut values = Vec::with_capacity(cells.len());
            for (row, s) in cells.iter().enumerate() {
                if is_missing(s) {
                    values.push(None);
                } else {
                    let v = parse_cell(s).ok_or_else(|| Error::ParseFailure {
                        column: name.to_string(),
                        row,
                        value: s.clone(),
                    })?;
                    values.push(Some(v));
                }
            }
            Ok(Column::numeric(name, values))
        }
        ColumnKind::Categorical => {
            let values: Vec<Option<&str>> = cells
                .iter()
                .map(|s| if is_missing(s) { None } else { Some(s.as_str()) })
                .collect();
            Ok(Column::categorical(name, &values))
        }
    }
}

pub fn write_csv<W: Write>(table: &Table, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(table.columns().iter().map(|c| c.name.as_str()))?;
    for i in 0..table.n_rows() {
        w.write_record(table.columns().iter().map(|c| c.cell_text(i)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(table: &Table, path: impl AsRef<Path>) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_csv(table, std::io::BufWriter::new(f))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingCount {
    pub column: String,
    pub missing: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub n_rows: usize,
    pub missing_per_column: Vec<MissingCount>,
    pub duplicate_row_count: usize,
}

impl AuditReport {
    pub fn missing(&self, column: &str) -> Option<usize> {
        self.missing_per_column
            .iter()
            .find(|m| m.column == column)
            .map(|m| m.missing)
    }

    pub fn total_missing(&self) -> usize {
        self.missing_per_column.iter().map(|m| m.missing).sum()
    }
}

/// Missing cells per column and duplicate rows (occurrences beyond the first).
pub fn audit(t: &Table) -> AuditReport {
    let missing_per_column = t
        .columns()
        .iter()
        .map(|c| MissingCount {
            column: c.name.clone(),
            missing: c.missing_count(),
        })
        .collect();
    let mut seen = HashSet::with_capacity(t.n_rows());
    let mut duplicate_row_count = 0;
    for i in 0..t.n_rows() {
        let key: Vec<u64> = t.columns().iter().map(|c| c.row_key(i)).collect();
        if !seen.insert(key) {
            duplicate_row_count += 1;
        }
    }
    AuditReport {
        n_rows: t.n_rows(),
        missing_per_column,
        duplicate_row_count,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub column: String,
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub skewness: f64,
}

/// Summary of one sample. Missing values must already be removed.
/// Moments are summed in sorted order, so row order never changes a bit.
/// An empty sample yields NaN statistics with `count = 0`.
pub fn summarize(column: &str, values: &[f64]) -> ColumnSummary {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let (min, max) = if n == 0 {
        (f64::NAN, f64::NAN)
    } else {
        (sorted[0], sorted[n - 1])
    };
    ColumnSummary {
        column: column.to_string(),
        count: n,
        mean: stats::mean(&sorted),
        std: stats::sample_std(&sorted),
        min,
        q1: stats::quantile_sorted(&sorted, 0.25),
        median: stats::quantile_sorted(&sorted, 0.5),
        q3: stats::quantile_sorted(&sorted, 0.75),
        max,
        skewness: stats::skewness(&sorted),
    }
}

/// Summary statistics for every numeric column (missing cells excluded).
pub fn describe(t: &Table) -> Result<Vec<ColumnSummary>> {
    let out: Vec<ColumnSummary> = t
        .columns()
        .iter()
        .filter_map(|c| {
            c.as_numeric().map(|v| {
                let present: Vec<f64> = v.iter().flatten().copied().collect();
                summarize(&c.name, &present)
            })
        })
        .collect();
    if out.is_empty() {
        return Err(Error::NoNumericColumns);
    }
    Ok(out)
}
