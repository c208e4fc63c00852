//! Schema JSON and CSV files.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::data::{validate_dataset, Dataset, Schema, VarKind};
use crate::error::{Error, Result};

use super::codec::from_json_str;

pub fn read_schema(path: &Path) -> Result<Schema> {
    let text = fs::read_to_string(path)?;
    parse_schema(&text)
}

pub fn parse_schema(text: &str) -> Result<Schema> {
    let schema: Schema = from_json_str(text)?;
    schema.check()?;
    Ok(schema)
}

pub fn write_schema(schema: &Schema, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(schema).map_err(|e| Error::Internal(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Reads a CSV file against the schema stored at `schema_path`.
pub fn ingest_csv(path: &Path, schema_path: &Path) -> Result<Dataset> {
    read_csv(path, Arc::new(read_schema(schema_path)?))
}

/// Reads a CSV file whose header names the schema's variables in any order.
/// Discrete cells hold a declared label, or the value index when the
/// variable declares no labels. Rows are numbered from 1 in errors.
pub fn read_csv(path: &Path, schema: Arc<Schema>) -> Result<Dataset> {
    let err = |row: usize, column: &str, msg: String| Error::Csv {
        path: path.to_path_buf(),
        row,
        column: column.to_string(),
        msg,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| err(0, "", e.to_string()))?;
    let header = reader.headers().map_err(|e| err(0, "", e.to_string()))?.clone();
    let mut columns = Vec::with_capacity(header.len());
    for name in header.iter() {
        let v = schema
            .index_of(name)
            .ok_or_else(|| err(0, name, "column not declared in the schema".into()))?;
        if columns.contains(&v) {
            return Err(err(0, name, "column appears twice".into()));
        }
        columns.push(v);
    }
    if let Some(missing) = schema.variables.iter().enumerate().find(|(v, _)| !columns.contains(v)) {
        return Err(err(0, &missing.1.name, "schema variable missing from the header".into()));
    }
    let labels: Vec<Option<HashMap<&str, u32>>> = schema
        .variables
        .iter()
        .map(|var| match &var.kind {
            VarKind::Discrete { values, .. } if !values.is_empty() => {
                Some(values.iter().enumerate().map(|(i, s)| (s.as_str(), i as u32)).collect())
            }
            _ => None,
        })
        .collect();

    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let line = r + 1;
        let record = record.map_err(|e| err(line, "", e.to_string()))?;
        let mut row = vec![0.0; schema.len()];
        for (cell, &v) in record.iter().zip(&columns) {
            let var = &schema.variables[v];
            row[v] = match (&var.kind, &labels[v]) {
                (VarKind::Continuous { .. }, _) => cell
                    .parse::<f64>()
                    .map_err(|_| err(line, &var.name, format!("non-numeric value `{cell}`")))?,
                (VarKind::Discrete { .. }, Some(map)) => f64::from(
                    *map.get(cell)
                        .ok_or_else(|| err(line, &var.name, format!("unknown label `{cell}`")))?,
                ),
                (VarKind::Discrete { arity, .. }, None) => {
                    let i: u32 = cell
                        .parse()
                        .map_err(|_| err(line, &var.name, format!("`{cell}` is not a value index")))?;
                    if i >= *arity {
                        return Err(err(line, &var.name, format!("index {i} outside arity {arity}")));
                    }
                    f64::from(i)
                }
            };
        }
        rows.push(row);
    }
    let data = Dataset::new(schema, rows);
    if let Some(v) = validate_dataset(&data.schema, &data).first() {
        let name = data.schema.variables[v.column].name.clone();
        return Err(err(v.row + 1, &name, v.to_string()));
    }
    Ok(data)
}

/// Writes the dataset with a header row, labels for labelled discrete
/// variables and shortest round-trip decimals for reals.
pub fn write_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.into()))?;
    let csv_err = |e: csv::Error| Error::Io(e.into());
    w.write_record(data.schema.variables.iter().map(|v| v.name.as_str()))
        .map_err(csv_err)?;
    for row in &data.rows {
        let cells: Vec<String> = row
            .iter()
            .zip(&data.schema.variables)
            .map(|(&x, var)| match var.kind {
                VarKind::Continuous { .. } => format!("{x}"),
                VarKind::Discrete { .. } => var.label(x as u32),
            })
            .collect();
        w.write_record(&cells).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
