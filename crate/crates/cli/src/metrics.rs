//! Metrics emission: line-delimited JSON with a fixed key set per file,
//! plus a CSV mirror with the same columns, so downstream plotting never
//! touches binary checkpoints.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde_json::Value;

pub struct MetricsWriter {
    keys: Vec<String>,
    jsonl: BufWriter<File>,
    csv: BufWriter<File>,
}

impl MetricsWriter {
    /// Create `<dir>/<name>.jsonl` and `<dir>/<name>.csv`; the CSV header
    /// is written immediately and every subsequent row must supply exactly
    /// these keys, in order.
    pub fn create(dir: &Path, name: &str, keys: &[&str]) -> std::io::Result<MetricsWriter> {
        let jsonl = BufWriter::new(File::create(dir.join(format!("{name}.jsonl")))?);
        let mut csv = BufWriter::new(File::create(dir.join(format!("{name}.csv")))?);
        writeln!(csv, "{}", keys.join(","))?;
        Ok(MetricsWriter {
            keys: keys.iter().map(|s| s.to_string()).collect(),
            jsonl,
            csv,
        })
    }

    /// Append one record; values pair up with the key set positionally.
    /// Rows are flushed immediately so a crashed run keeps its metrics.
    pub fn write(&mut self, values: &[Value]) -> std::io::Result<()> {
        assert_eq!(
            values.len(),
            self.keys.len(),
            "metrics row has {} values for {} keys",
            values.len(),
            self.keys.len()
        );
        let fields: Vec<String> = self
            .keys
            .iter()
            .zip(values)
            .map(|(k, v)| {
                format!(
                    "{}:{}",
                    serde_json::to_string(k).unwrap(),
                    serde_json::to_string(v).unwrap()
                )
            })
            .collect();
        writeln!(self.jsonl, "{{{}}}", fields.join(","))?;
        let cells: Vec<String> = values.iter().map(csv_cell).collect();
        writeln!(self.csv, "{}", cells.join(","))?;
        self.jsonl.flush()?;
        self.csv.flush()
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// JSON number for a float, degrading to `null` for non-finite values
/// (JSON has no representation for them).
pub fn fnum(x: f64) -> Value {
    serde_json::Number::from_f64(x)
        .map(Value::Number)
        .unwrap_or(Value::Null)
}
