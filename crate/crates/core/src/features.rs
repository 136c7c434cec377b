//! CSV exchange format for per-image features and content embeddings.
//!
//! ```text
//! id,f0,f1,...,f{d-1}
//! sketch_01,0.25,0.5,...
//! ```
//!
//! One row per image; `id` matches the image's manifest identifier.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureTable {
    dim: usize,
    ids: Vec<String>,
    rows: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
}

impl FeatureTable {
    pub fn new(dim: usize) -> Self {
        FeatureTable {
            dim,
            ..Default::default()
        }
    }

    pub fn push(&mut self, id: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let id = id.into();
        if values.len() != self.dim {
            return Err(Error::argument(format!(
                "row '{id}' has {} values, table dimension is {}",
                values.len(),
                self.dim
            )));
        }
        if self.index.contains_key(&id) {
            return Err(Error::argument(format!("duplicate id '{id}'")));
        }
        self.index.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.rows.push(values);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.index.get(id).map(|&i| self.rows[i].as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.ids
            .iter()
            .map(String::as_str)
            .zip(self.rows.iter().map(Vec::as_slice))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let header: Vec<String> = std::iter::once("id".to_string())
            .chain((0..self.dim).map(|i| format!("f{i}")))
            .collect();
        let io = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(&header).map_err(io)?;
        for (id, row) in self.iter() {
            let record: Vec<String> = std::iter::once(id.to_string())
                .chain(row.iter().map(|v| format!("{v:?}")))
                .collect();
            w.write_record(&record).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Format(e.to_string()))
    }
}

/// Parses the feature CSV format. Errors name the offending line (the
/// header is line 1).
pub fn parse_feature_csv<R: Read>(reader: R) -> Result<FeatureTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        None => {
            return Err(Error::Format(
                "feature file is empty, expected a header row".into(),
            ))
        }
        Some(r) => r.map_err(|e| Error::Format(format!("line 1: {e}")))?,
    };
    if header.get(0) != Some("id") || header.len() < 2 {
        return Err(Error::Format(
            "line 1: header must be id,f0,f1,...,f{d-1}".into(),
        ));
    }
    for (i, name) in header.iter().skip(1).enumerate() {
        if name != format!("f{i}") {
            return Err(Error::Format(format!(
                "line 1: column {} is named '{name}', expected 'f{i}'",
                i + 2
            )));
        }
    }
    let dim = header.len() - 1;
    let mut table = FeatureTable::new(dim);
    for (k, record) in records.enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| Error::Format(format!("line {line}: {e}")))?;
        if record.len() != dim + 1 {
            return Err(Error::Format(format!(
                "line {line}: expected {} fields, found {}",
                dim + 1,
                record.len()
            )));
        }
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(Error::Format(format!("line {line}: empty id")));
        }
        let values = record
            .iter()
            .skip(1)
            .enumerate()
            .map(|(c, cell)| match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Format(format!(
                    "line {line}: column f{c} value '{cell}' is not a finite number"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        if table.get(&id).is_some() {
            return Err(Error::Format(format!("line {line}: duplicate id '{id}'")));
        }
        table.push(id, values)?;
    }
    Ok(table)
}

pub fn load_feature_csv(path: impl AsRef<Path>) -> Result<FeatureTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::input(path, e))?;
    parse_feature_csv(file).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}
