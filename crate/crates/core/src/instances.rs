//! Instance files: one CSV row of feature values per instance.
//!
//! A first row in which no cell parses as a number is a header and is
//! skipped. A header column named `label` holds expected class indices.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InstanceSet {
    pub rows: Vec<Vec<f64>>,
    /// Expected classes, when the file has a `label` column.
    pub labels: Option<Vec<usize>>,
}

impl InstanceSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Checks every row against the network's input width.
    pub fn check_width(&self, input_dim: usize) -> Result<()> {
        match self.rows.iter().position(|r| r.len() != input_dim) {
            Some(i) => Err(Error::Instances(format!(
                "row {} has {} values, the model expects {input_dim}",
                i + 1,
                self.rows[i].len()
            ))),
            None => Ok(()),
        }
    }
}

pub fn ingest_csv(path: impl AsRef<Path>) -> Result<InstanceSet> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Instances(format!("{}: {e}", path.display())))?;
    parse_csv(file)
}

pub fn parse_csv(reader: impl Read) -> Result<InstanceSet> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);

    let mut set = InstanceSet::default();
    let mut label_col = None;
    let mut width = None;
    for (idx, record) in csv.records().enumerate() {
        let record = record.map_err(|e| Error::Instances(e.to_string()))?;
        let line = record.position().map_or(idx as u64 + 1, |p| p.line());
        if idx == 0 && record.iter().all(|c| c.parse::<f64>().is_err()) {
            label_col = record.iter().position(|c| c.eq_ignore_ascii_case("label"));
            if label_col.is_some() {
                set.labels = Some(Vec::new());
            }
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::Instances(format!(
                "row {line} has {} fields, expected {expected}",
                record.len()
            )));
        }
        let mut row = Vec::with_capacity(record.len());
        for (col, cell) in record.iter().enumerate() {
            if Some(col) == label_col {
                let label = cell.parse::<usize>().map_err(|_| {
                    Error::Instances(format!(
                        "row {line}, column {}: `{cell}` is not a class index",
                        col + 1
                    ))
                })?;
                set.labels
                    .as_mut()
                    .expect("label column implies labels")
                    .push(label);
                continue;
            }
            let v = cell
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    Error::Instances(format!(
                        "row {line}, column {}: `{cell}` is not a finite number",
                        col + 1
                    ))
                })?;
            row.push(v);
        }
        set.rows.push(row);
    }
    Ok(set)
}
