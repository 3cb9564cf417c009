use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A numeric table read from a CSV file with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new(header: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != header.len()) {
            return Err(Error::Csv(format!(
                "row {} has {} fields, header has {}",
                i + 1,
                r.len(),
                header.len()
            )));
        }
        Ok(CsvTable { header, rows })
    }

    pub fn from_reader(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Csv(e.to_string()))?
            .iter()
            .map(str::to_owned)
            .collect();
        if header.is_empty() || header.iter().all(String::is_empty) {
            return Err(Error::Csv("missing header row".into()));
        }
        let mut rows = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Csv(e.to_string()))?;
            let row = record
                .iter()
                .enumerate()
                .map(|(j, field)| {
                    field.parse::<f64>().map_err(|_| {
                        Error::Csv(format!("row {}, column `{}`: `{field}` is not a number", i + 1, header[j]))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        CsvTable::new(header, rows)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| Error::IoFailure {
            path: path.to_owned(),
            source,
        })?;
        CsvTable::from_reader(file)
    }

    pub fn write_to(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let err = |e: csv::Error| Error::Csv(e.to_string());
        w.write_record(&self.header).map_err(err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v:?}"))).map_err(err)?;
        }
        w.flush().map_err(|e| Error::Csv(e.to_string()))
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Csv(format!("no column named `{name}`")))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Every column except `exclude` as an `[n, p]` matrix.
    pub fn features(&self, exclude: Option<&str>) -> Result<Tensor> {
        let skip = exclude.map(|n| self.column_index(n)).transpose()?;
        let p = self.header.len() - usize::from(skip.is_some());
        let values = self
            .rows
            .iter()
            .flat_map(|r| r.iter().enumerate().filter(|(j, _)| Some(*j) != skip).map(|(_, v)| *v))
            .collect();
        Tensor::from_f64(values, vec![self.rows.len(), p])
    }

    /// Splits into a feature matrix and the named target column.
    pub fn split_target(&self, target: &str) -> Result<(Tensor, Tensor)> {
        Ok((self.features(Some(target))?, Tensor::vector_f64(self.column(target)?)))
    }
}
