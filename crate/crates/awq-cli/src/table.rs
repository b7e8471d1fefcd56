use crate::error::{CliError, CliResult};
use awq::qseries::C64;
use clap::ValueEnum;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Rectangular output; every row has one cell per column.
#[derive(Debug, Clone, Default)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<Value>>,
}

/// Builder for one row. Complex values expand into `<name>_re`, `<name>_im`.
#[derive(Debug, Default)]
pub struct Row {
    cells: Vec<(String, Value)>,
}

impl Row {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cell(mut self, name: &str, v: impl Into<Value>) -> Self {
        self.cells.push((name.to_string(), v.into()));
        self
    }

    pub fn complex(self, name: &str, z: C64) -> Self {
        self.cell(&format!("{name}_re"), z.re).cell(&format!("{name}_im"), z.im)
    }
}

impl Table {
    pub fn push(&mut self, row: Row) {
        if self.rows.is_empty() && self.columns.is_empty() {
            self.columns = row.cells.iter().map(|(n, _)| n.clone()).collect();
        }
        debug_assert!(row.cells.iter().map(|(n, _)| n).eq(self.columns.iter()), "row layout differs from header");
        self.rows.push(row.cells.into_iter().map(|(_, v)| v).collect());
    }

    pub fn render(&self, format: Format) -> CliResult<String> {
        match format {
            Format::Json => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|r| Value::Object(self.columns.iter().cloned().zip(r.iter().cloned()).collect::<Map<_, _>>()))
                    .collect();
                let mut s = serde_json::to_string_pretty(&rows).map_err(|e| CliError::Io(e.into()))?;
                s.push('\n');
                Ok(s)
            }
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                let csv_err = |e: csv::Error| CliError::Io(std::io::Error::other(e));
                w.write_record(&self.columns).map_err(csv_err)?;
                for r in &self.rows {
                    w.write_record(r.iter().map(cell_text)).map_err(csv_err)?;
                }
                let bytes = w.into_inner().map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))?;
                Ok(String::from_utf8_lossy(&bytes).into_owned())
            }
        }
    }
}

fn cell_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}
