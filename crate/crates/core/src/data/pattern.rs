use std::collections::HashMap;

use serde::Serialize;

use super::Dataset;

/// Distinct missingness patterns. In `patterns`, 1 marks observed and 0
/// missing; columns follow `columns`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MdPattern {
    pub columns: Vec<String>,
    pub patterns: Vec<Vec<u8>>,
    pub counts: Vec<usize>,
    pub missing_per_variable: Vec<usize>,
}

/// Columns are ordered by missing count (ascending, ties in data order);
/// patterns by frequency (descending, ties by bit string).
pub fn md_pattern(ds: &Dataset, vars: Option<&[String]>) -> MdPattern {
    let cols: Vec<&super::Column> = match vars {
        Some(v) => v.iter().filter_map(|n| ds.column(n)).collect(),
        None => ds.columns().iter().collect(),
    };
    let mut order: Vec<usize> = (0..cols.len()).collect();
    let miss: Vec<usize> = cols.iter().map(|c| c.n_missing()).collect();
    order.sort_by_key(|&j| miss[j]);

    let mut counts: HashMap<Vec<u8>, usize> = HashMap::new();
    for r in 0..ds.n_rows() {
        let p: Vec<u8> = order
            .iter()
            .map(|&j| u8::from(!cols[j].is_missing(r)))
            .collect();
        *counts.entry(p).or_default() += 1;
    }
    let mut rows: Vec<(Vec<u8>, usize)> = counts.into_iter().collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    MdPattern {
        columns: order.iter().map(|&j| cols[j].name.clone()).collect(),
        missing_per_variable: order.iter().map(|&j| miss[j]).collect(),
        patterns: rows.iter().map(|r| r.0.clone()).collect(),
        counts: rows.iter().map(|r| r.1).collect(),
    }
}

impl MdPattern {
    /// CSV with one row per pattern and a trailing `count` column.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = self.columns.clone();
        header.push("count".into());
        w.write_record(&header).expect("in-memory write");
        for (p, c) in self.patterns.iter().zip(&self.counts) {
            let mut rec: Vec<String> = p.iter().map(|b| b.to_string()).collect();
            rec.push(c.to_string());
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}
