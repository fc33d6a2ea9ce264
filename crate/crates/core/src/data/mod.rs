//! Typed tabular data: schema-driven CSV ingestion, missingness tracking,
//! row subsetting, and the small transformations the modelling layer needs
//! (weights extraction, binary outcomes, dummy blocks).
//!
//! Values are stored columnar. Every cell is `Option`-al; filters and
//! fits decide per-operation how to treat missingness. Rows are never
//! mutated in place — subsetting operations build new datasets so retained
//! rows stay bit-identical to their inputs.

mod clean;

pub use clean::{
    apply_filters, center_continuous, dummy_code, quantile_type7, remove_outliers_iqr,
    Comparison, FilterCondition, FilterRhs, FilterRule, RejectionReport, RuleRejection,
};

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// What a column holds and how to parse it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnKind {
    /// Real-valued covariate.
    Continuous,
    /// Finite set of string levels with a designated reference level.
    Categorical {
        levels: Vec<String>,
        reference: String,
    },
    /// Opaque grouping key (region code, cluster id); usable as a
    /// random-intercept grouping factor, never as a numeric covariate.
    Identifier,
    /// Survey weight. At most one per schema.
    Weight,
    /// Geographic coordinate; numerically continuous but kept distinct so
    /// configuration errors (centering a longitude, say) are catchable.
    Coordinate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

/// Columnar cell storage. `Label` holds indices into the schema's declared
/// level list.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Float(Vec<Option<f64>>),
    Label(Vec<Option<u32>>),
    Text(Vec<Option<String>>),
}

impl Column {
    fn len(&self) -> usize {
        match self {
            Column::Float(v) => v.len(),
            Column::Label(v) => v.len(),
            Column::Text(v) => v.len(),
        }
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            Column::Float(v) => v[row].is_none(),
            Column::Label(v) => v[row].is_none(),
            Column::Text(v) => v[row].is_none(),
        }
    }

    fn gather(&self, rows: &[usize]) -> Column {
        match self {
            Column::Float(v) => Column::Float(rows.iter().map(|&r| v[r]).collect()),
            Column::Label(v) => Column::Label(rows.iter().map(|&r| v[r]).collect()),
            Column::Text(v) => Column::Text(rows.iter().map(|&r| v[r].clone()).collect()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    schema: Vec<ColumnSchema>,
    columns: Vec<Column>,
    n_rows: usize,
}

fn validate_schema(schema: &[ColumnSchema]) -> Result<()> {
    let mut seen = BTreeSet::new();
    let mut weight_cols = 0usize;
    for col in schema {
        if !seen.insert(col.name.as_str()) {
            return Err(Error::schema(format!(
                "duplicate column '{}' in schema",
                col.name
            )));
        }
        match &col.kind {
            ColumnKind::Weight => weight_cols += 1,
            ColumnKind::Categorical { levels, reference } => {
                if levels.is_empty() {
                    return Err(Error::schema(format!(
                        "categorical column '{}' declares no levels",
                        col.name
                    )));
                }
                let mut lvls = BTreeSet::new();
                for l in levels {
                    if !lvls.insert(l.as_str()) {
                        return Err(Error::schema(format!(
                            "categorical column '{}' declares duplicate level '{}'",
                            col.name, l
                        )));
                    }
                }
                if !levels.contains(reference) {
                    return Err(Error::schema(format!(
                        "categorical column '{}': reference level '{}' is not among its levels",
                        col.name, reference
                    )));
                }
            }
            _ => {}
        }
    }
    if weight_cols > 1 {
        return Err(Error::schema(format!(
            "schema declares {weight_cols} weight columns; at most one is allowed"
        )));
    }
    Ok(())
}

impl Dataset {
    /// Build a dataset directly from columns. Intended for generators and
    /// tests; CSV ingestion is the main entry point.
    pub fn from_columns(schema: Vec<ColumnSchema>, columns: Vec<Column>) -> Result<Dataset> {
        validate_schema(&schema)?;
        if schema.len() != columns.len() {
            return Err(Error::schema(format!(
                "{} schema columns but {} data columns",
                schema.len(),
                columns.len()
            )));
        }
        let n_rows = columns.first().map_or(0, Column::len);
        for (cs, col) in schema.iter().zip(&columns) {
            if col.len() != n_rows {
                return Err(Error::schema(format!(
                    "column '{}' has {} rows, expected {}",
                    cs.name,
                    col.len(),
                    n_rows
                )));
            }
            let kind_ok = matches!(
                (&cs.kind, col),
                (ColumnKind::Continuous, Column::Float(_))
                    | (ColumnKind::Weight, Column::Float(_))
                    | (ColumnKind::Coordinate, Column::Float(_))
                    | (ColumnKind::Categorical { .. }, Column::Label(_))
                    | (ColumnKind::Identifier, Column::Text(_))
            );
            if !kind_ok {
                return Err(Error::schema(format!(
                    "column '{}' storage does not match its declared kind",
                    cs.name
                )));
            }
        }
        let ds = Dataset {
            schema,
            columns,
            n_rows,
        };
        ds.validate_weights()?;
        Ok(ds)
    }

    /// Parse a CSV file against the schema. The header is mandatory and
    /// order-insensitive; columns in the file but not the schema are
    /// ignored. Unparseable or empty numeric cells become missing values;
    /// a categorical value outside the declared levels is a hard error
    /// with its (1-based) data row number.
    pub fn from_csv_path(path: impl AsRef<Path>, schema: Vec<ColumnSchema>) -> Result<Dataset> {
        let file = std::fs::File::open(path.as_ref()).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.as_ref().display()),
            ))
        })?;
        Self::from_csv_reader(file, schema)
    }

    pub fn from_csv_reader(reader: impl Read, schema: Vec<ColumnSchema>) -> Result<Dataset> {
        validate_schema(&schema)?;
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let mut seen_headers = BTreeSet::new();
        for h in headers.iter() {
            if !seen_headers.insert(h) {
                return Err(Error::schema(format!("duplicate CSV header '{h}'")));
            }
        }
        // Map each schema column to its position in the file.
        let mut positions = Vec::with_capacity(schema.len());
        for col in &schema {
            match headers.iter().position(|h| h == col.name) {
                Some(p) => positions.push(p),
                None => {
                    return Err(Error::schema(format!(
                        "column '{}' is missing from the CSV header",
                        col.name
                    )))
                }
            }
        }

        let mut columns: Vec<Column> = schema
            .iter()
            .map(|c| match c.kind {
                ColumnKind::Categorical { .. } => Column::Label(Vec::new()),
                ColumnKind::Identifier => Column::Text(Vec::new()),
                _ => Column::Float(Vec::new()),
            })
            .collect();

        for (rec_idx, record) in rdr.records().enumerate() {
            let record = record?;
            let row_no = rec_idx + 1;
            for (ci, col) in schema.iter().enumerate() {
                let raw = record.get(positions[ci]).unwrap_or("").trim();
                match (&col.kind, &mut columns[ci]) {
                    (ColumnKind::Categorical { levels, .. }, Column::Label(out)) => {
                        if raw.is_empty() {
                            out.push(None);
                        } else {
                            match levels.iter().position(|l| l == raw) {
                                Some(ix) => out.push(Some(ix as u32)),
                                None => {
                                    return Err(Error::Parse {
                                        row: row_no,
                                        message: format!(
                                            "value '{raw}' in column '{}' is not a declared level",
                                            col.name
                                        ),
                                    })
                                }
                            }
                        }
                    }
                    (ColumnKind::Identifier, Column::Text(out)) => {
                        out.push(if raw.is_empty() {
                            None
                        } else {
                            Some(raw.to_string())
                        });
                    }
                    (_, Column::Float(out)) => {
                        out.push(raw.parse::<f64>().ok().filter(|v| v.is_finite()));
                    }
                    _ => unreachable!("storage allocated per kind above"),
                }
            }
        }
        let n_rows = columns.first().map_or(0, Column::len);
        let ds = Dataset {
            schema,
            columns,
            n_rows,
        };
        ds.validate_weights()?;
        Ok(ds)
    }

    /// Weight sanity: if a weight column exists it must be complete,
    /// finite, non-negative, and not identically zero.
    fn validate_weights(&self) -> Result<()> {
        let Some(ix) = self
            .schema
            .iter()
            .position(|c| matches!(c.kind, ColumnKind::Weight))
        else {
            return Ok(());
        };
        let name = &self.schema[ix].name;
        let Column::Float(vals) = &self.columns[ix] else {
            unreachable!()
        };
        let mut total = 0.0;
        for (row, v) in vals.iter().enumerate() {
            match v {
                None => {
                    return Err(Error::Parse {
                        row: row + 1,
                        message: format!("weight column '{name}' has a missing or unparseable cell"),
                    })
                }
                Some(w) if *w < 0.0 => {
                    return Err(Error::domain(format!(
                        "weight column '{name}' has a negative value {w} at data row {}",
                        row + 1
                    )))
                }
                Some(w) => total += w,
            }
        }
        if self.n_rows > 0 && !(total > 0.0) {
            return Err(Error::domain(format!(
                "weight column '{name}' sums to zero; at least one positive weight is required"
            )));
        }
        Ok(())
    }

    /// Serialize back to CSV in schema order. Floats use shortest
    /// round-trip formatting, so a write/load cycle reproduces every value
    /// bit for bit; missing cells are empty fields.
    pub fn to_csv_writer(&self, writer: impl Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(self.schema.iter().map(|c| c.name.as_str()))?;
        let mut record = Vec::with_capacity(self.schema.len());
        for row in 0..self.n_rows {
            record.clear();
            for (col, cs) in self.columns.iter().zip(&self.schema) {
                let cell = match col {
                    Column::Float(v) => v[row].map(|x| x.to_string()).unwrap_or_default(),
                    Column::Label(v) => match (&cs.kind, v[row]) {
                        (ColumnKind::Categorical { levels, .. }, Some(ix)) => {
                            levels[ix as usize].clone()
                        }
                        _ => String::new(),
                    },
                    Column::Text(v) => v[row].clone().unwrap_or_default(),
                };
                record.push(cell);
            }
            wtr.write_record(&record)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.to_csv_writer(file)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.schema
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.schema
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::config(format!("unknown column '{name}'")))
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        Ok(&self.columns[self.column_index(name)?])
    }

    pub fn column_schema(&self, name: &str) -> Result<&ColumnSchema> {
        Ok(&self.schema[self.column_index(name)?])
    }

    /// Survey weights: the weight column if present, otherwise all ones.
    pub fn weights(&self) -> Vec<f64> {
        for (cs, col) in self.schema.iter().zip(&self.columns) {
            if matches!(cs.kind, ColumnKind::Weight) {
                if let Column::Float(v) = col {
                    return v.iter().map(|x| x.expect("weights validated at load")).collect();
                }
            }
        }
        vec![1.0; self.n_rows]
    }

    /// Numeric values of a continuous/coordinate/weight column, missing
    /// cells preserved as `None`.
    pub fn float_values(&self, name: &str) -> Result<&[Option<f64>]> {
        match self.column(name)? {
            Column::Float(v) => Ok(v),
            _ => Err(Error::config(format!("column '{name}' is not numeric"))),
        }
    }

    /// Complete numeric values; errors if any cell is missing.
    pub fn float_column(&self, name: &str) -> Result<Vec<f64>> {
        let vals = self.float_values(name)?;
        let mut out = Vec::with_capacity(vals.len());
        for (row, v) in vals.iter().enumerate() {
            match v {
                Some(x) => out.push(*x),
                None => {
                    return Err(Error::domain(format!(
                        "column '{name}' has a missing value at data row {}; run imputation first",
                        row + 1
                    )))
                }
            }
        }
        Ok(out)
    }

    /// Level indices of a categorical column, missing preserved.
    pub fn label_values(&self, name: &str) -> Result<&[Option<u32>]> {
        match self.column(name)? {
            Column::Label(v) => Ok(v),
            _ => Err(Error::config(format!("column '{name}' is not categorical"))),
        }
    }

    /// Declared levels of a categorical column.
    pub fn levels(&self, name: &str) -> Result<(&[String], &str)> {
        match &self.column_schema(name)?.kind {
            ColumnKind::Categorical { levels, reference } => Ok((levels, reference)),
            _ => Err(Error::config(format!("column '{name}' is not categorical"))),
        }
    }

    /// A 0/1 outcome vector. Accepts a continuous column whose observed
    /// values are exactly 0 or 1, or a two-level categorical column where
    /// the non-reference level counts as 1.
    pub fn binary_outcome(&self, name: &str) -> Result<Vec<f64>> {
        match self.column(name)? {
            Column::Float(_) => {
                let vals = self.float_column(name)?;
                for (row, v) in vals.iter().enumerate() {
                    if *v != 0.0 && *v != 1.0 {
                        return Err(Error::domain(format!(
                            "outcome column '{name}' has non-binary value {v} at data row {}",
                            row + 1
                        )));
                    }
                }
                Ok(vals)
            }
            Column::Label(v) => {
                let (levels, reference) = self.levels(name)?;
                if levels.len() != 2 {
                    return Err(Error::config(format!(
                        "outcome column '{name}' has {} levels; a binary outcome needs exactly 2",
                        levels.len()
                    )));
                }
                let ref_ix = levels.iter().position(|l| l == reference).unwrap() as u32;
                let mut out = Vec::with_capacity(v.len());
                for (row, lv) in v.iter().enumerate() {
                    match lv {
                        Some(ix) => out.push(if *ix == ref_ix { 0.0 } else { 1.0 }),
                        None => {
                            return Err(Error::domain(format!(
                                "outcome column '{name}' is missing at data row {}",
                                row + 1
                            )))
                        }
                    }
                }
                Ok(out)
            }
            Column::Text(_) => Err(Error::config(format!(
                "outcome column '{name}' is an identifier; outcomes must be binary"
            ))),
        }
    }

    /// Count of missing cells per column, in schema order.
    pub fn missing_counts(&self) -> Vec<(String, usize)> {
        self.schema
            .iter()
            .zip(&self.columns)
            .map(|(cs, col)| {
                let n = (0..self.n_rows).filter(|&r| col.is_missing(r)).count();
                (cs.name.clone(), n)
            })
            .collect()
    }

    /// New dataset keeping rows where `keep` is true. Order preserved.
    pub fn retain_rows(&self, keep: &[bool]) -> Dataset {
        assert_eq!(keep.len(), self.n_rows);
        let rows: Vec<usize> = (0..self.n_rows).filter(|&r| keep[r]).collect();
        self.select_rows(&rows)
    }

    /// New dataset with exactly the given rows, in the given order.
    /// Indices may repeat (bootstrap resampling).
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c.gather(rows)).collect(),
            n_rows: rows.len(),
        }
    }

    pub(crate) fn columns_mut(&mut self) -> &mut Vec<Column> {
        &mut self.columns
    }
}
