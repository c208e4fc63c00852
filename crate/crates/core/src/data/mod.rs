//! Schemas, datasets and validation.
//!
//! Rows are stored as `f64` vectors: continuous variables hold their value,
//! discrete variables hold the value index as an exactly representable integer.

mod prep;
mod split;

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use prep::{add_noise, scale_to_unit, AffineMap, NoiseKind};
pub use split::{holdout_count, holdout_indices, kfold_indices, kfold_partition, split_holdout, SplitPlan};

pub type VarId = usize;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum VarKind {
    Continuous {
        lo: f64,
        hi: f64,
    },
    Discrete {
        arity: u32,
        /// Optional labels used when reading and writing CSV files.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        values: Vec<String>,
    },
}

impl VarKind {
    pub fn is_continuous(&self) -> bool {
        matches!(self, VarKind::Continuous { .. })
    }

    pub fn discrete(arity: u32) -> Self {
        VarKind::Discrete {
            arity,
            values: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    #[serde(flatten)]
    pub kind: VarKind,
}

impl Variable {
    pub fn continuous(name: impl Into<String>, lo: f64, hi: f64) -> Self {
        Variable {
            name: name.into(),
            kind: VarKind::Continuous { lo, hi },
        }
    }

    pub fn discrete(name: impl Into<String>, arity: u32) -> Self {
        Variable {
            name: name.into(),
            kind: VarKind::discrete(arity),
        }
    }

    /// Label of discrete value `index`, falling back to the index itself.
    pub fn label(&self, index: u32) -> String {
        match &self.kind {
            VarKind::Discrete { values, .. } if !values.is_empty() => values[index as usize].clone(),
            _ => index.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub variables: Vec<Variable>,
}

impl Schema {
    /// Builds a schema, checking arity, bounds and name uniqueness.
    pub fn new(variables: Vec<Variable>) -> Result<Self> {
        let schema = Schema { variables };
        schema.check()?;
        Ok(schema)
    }

    pub fn check(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for v in &self.variables {
            if !seen.insert(v.name.as_str()) {
                return Err(Error::Schema(format!("duplicate variable name `{}`", v.name)));
            }
            match &v.kind {
                VarKind::Continuous { lo, hi } => {
                    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                        return Err(Error::Schema(format!(
                            "variable `{}` needs finite lo < hi, got [{lo}, {hi}]",
                            v.name
                        )));
                    }
                }
                VarKind::Discrete { arity, values } => {
                    if *arity < 2 {
                        return Err(Error::Schema(format!(
                            "discrete variable `{}` needs arity >= 2, got {arity}",
                            v.name
                        )));
                    }
                    if !values.is_empty() && values.len() != *arity as usize {
                        return Err(Error::Schema(format!(
                            "discrete variable `{}` declares arity {arity} but lists {} values",
                            v.name,
                            values.len()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn kind(&self, var: VarId) -> &VarKind {
        &self.variables[var].kind
    }

    /// Stable FNV-1a digest of the canonical JSON rendering, used to tie
    /// model files to the schema they were trained on.
    pub fn digest(&self) -> String {
        let text = serde_json::to_string(self).expect("schema serializes");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

/// A single cell value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Value {
    Discrete(u32),
    Real(f64),
}

impl Value {
    pub fn encode(self) -> f64 {
        match self {
            Value::Discrete(i) => f64::from(i),
            Value::Real(x) => x,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub schema: Arc<Schema>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    WrongWidth,
    OutOfRange,
    NotAnIndex,
    NotFinite,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub row: usize,
    pub column: usize,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            ViolationKind::WrongWidth => "row width does not match schema",
            ViolationKind::OutOfRange => "value outside the variable's range",
            ViolationKind::NotAnIndex => "discrete value is not an integer index",
            ViolationKind::NotFinite => "value is not finite",
        };
        write!(f, "row {}, column {}: {what}", self.row, self.column)
    }
}

impl Dataset {
    pub fn new(schema: Arc<Schema>, rows: Vec<Vec<f64>>) -> Self {
        Dataset { schema, rows }
    }

    pub fn from_values(schema: Arc<Schema>, rows: &[Vec<Value>]) -> Self {
        let rows = rows
            .iter()
            .map(|r| r.iter().map(|v| v.encode()).collect())
            .collect();
        Dataset { schema, rows }
    }

    /// Builds a dataset and rejects it unless [`validate_dataset`] is clean.
    pub fn checked(schema: Arc<Schema>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let ds = Dataset { schema, rows };
        let report = validate_dataset(&ds.schema, &ds);
        if let Some(first) = report.first() {
            return Err(Error::Data(format!("{} violation(s); first: {first}", report.len())));
        }
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn value(&self, row: usize, col: VarId) -> Value {
        let x = self.rows[row][col];
        match self.schema.kind(col) {
            VarKind::Continuous { .. } => Value::Real(x),
            VarKind::Discrete { .. } => Value::Discrete(x as u32),
        }
    }

    pub fn column(&self, col: VarId) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(move |r| r[col])
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: Arc::clone(&self.schema),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }
}

/// Lists every violated dataset invariant. An empty list means the dataset is
/// consistent with the schema.
pub fn validate_dataset(schema: &Schema, data: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    for (r, row) in data.rows.iter().enumerate() {
        if row.len() != schema.len() {
            out.push(Violation {
                row: r,
                column: row.len().min(schema.len()),
                kind: ViolationKind::WrongWidth,
            });
            continue;
        }
        for (c, (&x, var)) in row.iter().zip(&schema.variables).enumerate() {
            let kind = if !x.is_finite() {
                Some(ViolationKind::NotFinite)
            } else {
                match var.kind {
                    VarKind::Continuous { lo, hi } => (x < lo || x > hi).then_some(ViolationKind::OutOfRange),
                    VarKind::Discrete { arity, .. } => {
                        if x.fract() != 0.0 {
                            Some(ViolationKind::NotAnIndex)
                        } else if x < 0.0 || x >= f64::from(arity) {
                            Some(ViolationKind::OutOfRange)
                        } else {
                            None
                        }
                    }
                }
            };
            if let Some(kind) = kind {
                out.push(Violation { row: r, column: c, kind });
            }
        }
    }
    out
}
