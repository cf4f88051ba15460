use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};

use super::{Column, Dataset};

/// Reads a CSV file with a header row. Cells equal to `na_token` or blank
/// are missing. Columns whose observed cells all parse as finite numbers are
/// numeric; the rest are categorical.
pub fn read_csv(path: impl AsRef<Path>, na_token: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)
        .map_err(|e| Error::Data(format!("cannot read '{}': {e}", path.display())))?;
    let text = String::from_utf8(bytes)
        .map_err(|_| Error::Data(format!("'{}' is not valid UTF-8", path.display())))?;
    read_csv_str(&text, na_token)
}

/// Writes a dataset as CSV; missing cells become `na_token`.
pub fn write_csv_string(ds: &Dataset, na_token: &str) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(ds.names())?;
    for r in 0..ds.n_rows() {
        w.write_record(
            ds.columns()
                .iter()
                .map(|c| c.label(r).unwrap_or_else(|| na_token.to_string())),
        )?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(format!("cannot write CSV: {e}")))?;
    String::from_utf8(bytes).map_err(|_| Error::Data("CSV output is not valid UTF-8".into()))
}

pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>, na_token: &str) -> Result<()> {
    std::fs::write(path, write_csv_string(ds, na_token)?)?;
    Ok(())
}

pub fn read_csv_str(text: &str, na_token: &str) -> Result<Dataset> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    if text.trim().is_empty() {
        return Err(Error::Data("empty file".into()));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut seen = HashSet::new();
    for h in &header {
        if h.is_empty() {
            return Err(Error::Data("empty column name in header".into()));
        }
        if !seen.insert(h.as_str()) {
            return Err(Error::Data(format!("duplicate column name '{h}'")));
        }
    }
    let mut cells: Vec<Vec<Option<String>>> = vec![Vec::new(); header.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        for (j, cell) in rec.iter().enumerate() {
            let missing = cell == na_token || cell.trim().is_empty();
            cells[j].push(if missing { None } else { Some(cell.to_string()) });
        }
    }
    let columns = header
        .iter()
        .zip(cells)
        .map(|(name, raw)| to_column(name, raw))
        .collect();
    Dataset::new(columns)
}

fn to_column(name: &str, raw: Vec<Option<String>>) -> Column {
    let parsed: Option<Vec<Option<f64>>> = raw
        .iter()
        .map(|c| match c {
            None => Some(None),
            Some(s) => s.trim().parse::<f64>().ok().filter(|v| v.is_finite()).map(Some),
        })
        .collect();
    match parsed {
        Some(values) => Column::numeric(name, values),
        None => Column::categorical(name, &raw),
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::UnequalLengths {
            pos,
            expected_len,
            len,
        } => Error::Data(format!(
            "ragged row{}: expected {expected_len} fields, found {len}",
            pos.as_ref()
                .map(|p| format!(" at line {}", p.line()))
                .unwrap_or_default()
        )),
        _ => Error::Csv(e),
    }
}

#[cfg(test)]
mod tests {
    use super::super::ColumnData;
    use super::*;

    #[test]
    fn numeric_and_categorical() {
        let ds = read_csv_str("a,b\n1,x\n2,NA\n", "NA").unwrap();
        assert_eq!(ds.n_rows(), 2);
        assert!(ds.column("a").unwrap().is_numeric());
        assert_eq!(ds.column("b").unwrap().n_missing(), 1);
    }

    #[test]
    fn single_numeric_column() {
        let ds = read_csv_str("a\n1\n2\n3", "NA").unwrap();
        assert_eq!(
            ds.column("a").unwrap().data,
            ColumnData::Numeric(vec![Some(1.0), Some(2.0), Some(3.0)])
        );
    }

    #[test]
    fn quoting_and_custom_na() {
        let ds = read_csv_str("x,\"y, z\"\n\"a,b\",.\n\"c\"\"d\",3\n,4\n", ".").unwrap();
        let x = ds.column("x").unwrap();
        assert_eq!(x.label(0).as_deref(), Some("a,b"));
        assert_eq!(x.label(1).as_deref(), Some("c\"d"));
        assert!(x.is_missing(2));
        assert_eq!(ds.column("y, z").unwrap().n_missing(), 1);
    }

    #[test]
    fn errors() {
        assert!(read_csv_str("", "NA").is_err());
        assert!(read_csv_str("a,a\n1,2\n", "NA").is_err());
        let e = read_csv_str("a,b\n1,2\n3\n", "NA").unwrap_err();
        assert!(e.to_string().contains("ragged"), "{e}");
    }
}
