//! Tabular data: loading, typing, missing-data patterns, contrasts, scaling.

mod contrasts;
mod csv_io;
mod meta;
mod pattern;
mod scaling;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use contrasts::{contrast_row, encode_contrasts, Coding, Contrasts};
pub use csv_io::{read_csv, read_csv_str, write_csv, write_csv_string};
pub use meta::{
    category_codes, infer_variable_meta, DeclaredType, MetaOverride, VarType, VariableMeta, LVLONE,
};
pub use pattern::{md_pattern, MdPattern};
pub use scaling::{apply_scaling, scaling_stats, unscale, ScaleStats};
pub use contrasts::{resolve_refcat, RefCatSpec};

/// Values of one column. Missing cells are `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ColumnData {
    Numeric(Vec<Option<f64>>),
    /// `codes` index into `levels`, which are kept in first-appearance order.
    Categorical {
        codes: Vec<Option<usize>>,
        levels: Vec<String>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

impl Column {
    pub fn numeric(name: &str, values: Vec<Option<f64>>) -> Self {
        Column {
            name: name.to_string(),
            data: ColumnData::Numeric(values),
        }
    }

    /// Builds a categorical column; levels are taken in order of appearance.
    pub fn categorical<S: AsRef<str>>(name: &str, values: &[Option<S>]) -> Self {
        let mut levels: Vec<String> = Vec::new();
        let codes = values
            .iter()
            .map(|v| {
                v.as_ref().map(|s| {
                    let s = s.as_ref();
                    match levels.iter().position(|l| l == s) {
                        Some(i) => i,
                        None => {
                            levels.push(s.to_string());
                            levels.len() - 1
                        }
                    }
                })
            })
            .collect();
        Column {
            name: name.to_string(),
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

    pub fn is_numeric(&self) -> bool {
        matches!(self.data, ColumnData::Numeric(_))
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match &self.data {
            ColumnData::Numeric(v) => v[row].is_none(),
            ColumnData::Categorical { codes, .. } => codes[row].is_none(),
        }
    }

    pub fn n_missing(&self) -> usize {
        (0..self.len()).filter(|&i| self.is_missing(i)).count()
    }

    pub fn value(&self, row: usize) -> Option<f64> {
        match &self.data {
            ColumnData::Numeric(v) => v[row],
            ColumnData::Categorical { .. } => None,
        }
    }

    /// Cell rendered as text; numbers use shortest round-trip formatting.
    pub fn label(&self, row: usize) -> Option<String> {
        match &self.data {
            ColumnData::Numeric(v) => v[row].map(|x| format!("{x}")),
            ColumnData::Categorical { codes, levels } => codes[row].map(|c| levels[c].clone()),
        }
    }

    pub fn numeric_values(&self) -> Result<&[Option<f64>]> {
        match &self.data {
            ColumnData::Numeric(v) => Ok(v),
            ColumnData::Categorical { .. } => Err(Error::Data(format!(
                "column '{}' is not numeric",
                self.name
            ))),
        }
    }
}

/// Cluster membership derived from a grouping column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grouping {
    pub var: String,
    /// Group index per row.
    pub ids: Vec<usize>,
    /// Group labels in first-appearance order.
    pub labels: Vec<String>,
    /// Rows of each group, in row order.
    pub rows: Vec<Vec<usize>>,
}

impl Grouping {
    pub fn n_groups(&self) -> usize {
        self.labels.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    columns: Vec<Column>,
    n_rows: usize,
    index: HashMap<String, usize>,
}

impl Dataset {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let n_rows = columns.first().map_or(0, Column::len);
        let mut index = HashMap::new();
        for (i, c) in columns.iter().enumerate() {
            if c.len() != n_rows {
                return Err(Error::Data(format!(
                    "column '{}' has {} rows, expected {n_rows}",
                    c.name,
                    c.len()
                )));
            }
            if index.insert(c.name.clone(), i).is_some() {
                return Err(Error::Data(format!("duplicate column name '{}'", c.name)));
            }
        }
        Ok(Dataset {
            columns,
            n_rows,
            index,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.index.get(name).map(|&i| &self.columns[i])
    }

    pub fn require(&self, name: &str) -> Result<&Column> {
        self.column(name)
            .ok_or_else(|| Error::Data(format!("variable '{name}' not found in data")))
    }

    pub fn has(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    /// Groups rows by the values of a complete column.
    pub fn grouping(&self, var: &str) -> Result<Grouping> {
        let col = self.require(var)?;
        let mut labels: Vec<String> = Vec::new();
        let mut lookup: HashMap<String, usize> = HashMap::new();
        let mut ids = Vec::with_capacity(self.n_rows);
        let mut rows: Vec<Vec<usize>> = Vec::new();
        for r in 0..self.n_rows {
            let label = col.label(r).ok_or_else(|| {
                Error::Data(format!("grouping variable '{var}' is missing in row {}", r + 1))
            })?;
            let g = *lookup.entry(label.clone()).or_insert_with(|| {
                labels.push(label);
                rows.push(Vec::new());
                labels.len() - 1
            });
            ids.push(g);
            rows[g].push(r);
        }
        Ok(Grouping {
            var: var.to_string(),
            ids,
            labels,
            rows,
        })
    }

    /// Dataset with only the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let columns = self
            .columns
            .iter()
            .map(|c| Column {
                name: c.name.clone(),
                data: match &c.data {
                    ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&r| v[r]).collect()),
                    ColumnData::Categorical { codes, levels } => ColumnData::Categorical {
                        codes: rows.iter().map(|&r| codes[r]).collect(),
                        levels: levels.clone(),
                    },
                },
            })
            .collect();
        Dataset::new(columns).expect("row selection keeps columns consistent")
    }
}
