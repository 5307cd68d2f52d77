//! CSV and file output. Floats use Rust's shortest round-trip formatting,
//! so equal values always print the same bytes.

use std::path::Path;

use crate::error::{LabError, Result};

/// An in-memory CSV table.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner()
            .map_err(|e| LabError::io("<csv buffer>", e.into_error()))
    }
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

/// Empty cell for a missing value.
pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| LabError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_unix_newlines() {
        let mut t = Table::new(&["x", "y", "error"]);
        t.push(vec![num(0.0), num(1.0), num(0.5)]);
        t.push(vec![num(1.0), num(0.1 + 0.2), opt_num(None)]);
        let text = String::from_utf8(t.to_bytes().unwrap()).unwrap();
        assert_eq!(text, "x,y,error\n0,1,0.5\n1,0.30000000000000004,\n");
    }

    #[test]
    #[should_panic(expected = "row width")]
    fn rejects_ragged_rows() {
        Table::new(&["a"]).push(vec![String::new(), String::new()]);
    }
}
