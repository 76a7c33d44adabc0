//! Deterministic CSV and JSON artifacts with a metadata header.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Ordered `key: value` metadata written ahead of every artifact.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metadata(Vec<(String, String)>);

impl Serialize for Metadata {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_map(self.0.iter().map(|(k, v)| (k, v)))
    }
}

impl Metadata {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends an entry; later entries with the same key are kept too.
    pub fn with(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.0.push((key.into(), value.to_string()));
        self
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.0.push((key.into(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.0
    }
}

/// Numeric table written as CSV with `# key: value` header lines.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub metadata: Metadata,
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            metadata: Metadata::new(),
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(invalid(
                "row",
                format!("has {} values for {} columns", row.len(), self.columns.len()),
            ));
        }
        self.rows.push(row);
        Ok(())
    }

    /// Values use Rust's shortest round-trip formatting, so equal tables
    /// render to identical bytes.
    pub fn render(&self) -> Result<String> {
        let mut s = String::new();
        for (k, v) in self.metadata.entries() {
            let _ = writeln!(s, "# {k}: {v}");
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Unsupported(format!("CSV encoding failed: {e}"));
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|x| x.to_string())).map_err(io)?;
        }
        let body = w
            .into_inner()
            .map_err(|e| Error::Unsupported(format!("CSV encoding failed: {e}")))?;
        s.push_str(&String::from_utf8_lossy(&body));
        Ok(s)
    }
}

/// JSON artifact: metadata plus a serializable payload.
#[derive(Clone, Debug, Serialize)]
pub struct JsonReport<'a, T: Serialize> {
    pub metadata: &'a Metadata,
    pub data: &'a T,
}

impl<T: Serialize> JsonReport<'_, T> {
    pub fn render(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map(|mut s| {
                s.push('\n');
                s
            })
            .map_err(|e| Error::Unsupported(format!("JSON serialization failed: {e}")))
    }
}
