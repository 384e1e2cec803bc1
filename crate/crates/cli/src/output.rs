use std::io::Write;
use std::path::Path;

use serde_json::{Map, Value};
use tempfile::NamedTempFile;

use crate::config::Format;
use crate::error::CliError;

pub type Record = Map<String, Value>;

/// One output file: ordered header entries plus records sharing a column set.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub header: Vec<(String, String)>,
    pub records: Vec<Record>,
}

impl Table {
    pub fn new(name: &str) -> Self {
        Table {
            name: name.into(),
            header: Vec::new(),
            records: Vec::new(),
        }
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.header.push((key.into(), value.to_string()));
        self
    }

    pub fn push(&mut self, record: Value) {
        match record {
            Value::Object(m) => self.records.push(m),
            other => panic!("records are JSON objects, got {other}"),
        }
    }

    fn columns(&self) -> Vec<String> {
        self.records
            .first()
            .map(|r| r.keys().cloned().collect())
            .unwrap_or_default()
    }

    pub fn render(&self, format: Format) -> Result<Vec<u8>, CliError> {
        match format {
            Format::Csv => self.render_csv(),
            Format::Json => {
                let header: Map<String, Value> = self
                    .header
                    .iter()
                    .map(|(k, v)| (k.clone(), Value::String(v.clone())))
                    .collect();
                let doc = serde_json::json!({ "header": header, "records": self.records });
                let mut bytes =
                    serde_json::to_vec_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
                bytes.push(b'\n');
                Ok(bytes)
            }
        }
    }

    fn render_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut out = Vec::new();
        for (k, v) in &self.header {
            writeln!(out, "# {k}: {v}")?;
        }
        let columns = self.columns();
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| CliError::Io(e.to_string());
        w.write_record(&columns).map_err(csv_err)?;
        for r in &self.records {
            w.write_record(columns.iter().map(|c| cell(r.get(c))))
                .map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.to_string()))
    }
}

fn cell(v: Option<&Value>) -> String {
    match v {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(other) => other.to_string(),
    }
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(dir: &Path, file: &str, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    let path = dir.join(file);
    tmp.persist(&path)
        .map_err(|e| CliError::Io(format!("cannot write {}: {}", path.display(), e.error)))?;
    Ok(())
}
