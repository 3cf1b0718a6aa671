//! Delimited-text loading and writing of paired fidelity data.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FidelityDataset, FidelityRow, MIN_ROWS};
use crate::error::{Error, Result};

/// Header names of the four mapped columns.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub hf_numerator: String,
    pub lf_numerator: String,
    pub hf_denominator: String,
    pub lf_denominator: String,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        Self {
            hf_numerator: "hf_numerator".into(),
            lf_numerator: "lf_numerator".into(),
            hf_denominator: "hf_denominator".into(),
            lf_denominator: "lf_denominator".into(),
        }
    }
}

impl ColumnSchema {
    /// Names in `(A, B, C, D)` order.
    pub fn names(&self) -> [&str; 4] {
        [
            &self.hf_numerator,
            &self.lf_numerator,
            &self.hf_denominator,
            &self.lf_denominator,
        ]
    }
}

/// Picks the most frequent of `,` `;` and tab in the header line; comma
/// wins ties.
pub fn detect_delimiter(text: &str) -> u8 {
    let header = text.lines().next().unwrap_or("");
    let mut best = (b',', header.matches(',').count());
    for &d in b";\t" {
        let count = header.matches(d as char).count();
        if count > best.1 {
            best = (d, count);
        }
    }
    best.0
}

/// Reads a headered delimited file. Row numbers in errors are 1-based data
/// rows (the header is not counted).
pub fn load_dataset(path: impl AsRef<Path>, schema: &ColumnSchema, delimiter: Option<u8>) -> Result<FidelityDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut ds = parse_dataset(&text, schema, delimiter)?;
    ds.source_path = Some(path.display().to_string());
    Ok(ds)
}

pub fn parse_dataset(text: &str, schema: &ColumnSchema, delimiter: Option<u8>) -> Result<FidelityDataset> {
    let delimiter = delimiter.unwrap_or_else(|| detect_delimiter(text));
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let names = schema.names();
    let mut idx = [0usize; 4];
    for (k, name) in names.iter().enumerate() {
        idx[k] = headers
            .iter()
            .position(|h| h == *name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
    }
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        let mut v = [0.0; 4];
        for k in 0..4 {
            let raw = record.get(idx[k]).unwrap_or("");
            let x: f64 = raw.parse().map_err(|_| Error::ParseFailure {
                row,
                column: names[k].to_string(),
                value: raw.to_string(),
            })?;
            if !x.is_finite() {
                return Err(Error::NonFiniteValue {
                    row,
                    column: names[k].to_string(),
                });
            }
            v[k] = x;
        }
        rows.push(FidelityRow::from_abcd(v));
    }
    if rows.len() < MIN_ROWS {
        return Err(Error::InsufficientRows {
            requested: MIN_ROWS,
            available: rows.len(),
        });
    }
    Ok(FidelityDataset {
        rows,
        source_path: None,
    })
}

/// Comma-separated output with the schema's header names.
pub fn write_dataset<W: Write>(dataset: &FidelityDataset, schema: &ColumnSchema, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(schema.names())?;
    for row in &dataset.rows {
        w.write_record(row.abcd().map(|x| x.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
