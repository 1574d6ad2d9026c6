//! Reports: a structured summary plus named tables, rendered as text,
//! delimiter-separated tables or JSON.

use std::fmt::Write as _;
use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Text,
    Table,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r.iter().map(cell)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
    }
}

/// Field excluded from reproducibility comparisons.
pub const TIMESTAMP_FIELD: &str = "generated_at";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: Value,
    pub summary: Map<String, Value>,
    pub tables: Vec<Table>,
    pub generated_at: String,
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => "NA".into(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn now_utc() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0);
    chrono::DateTime::from_timestamp(secs, 0)
        .map(|t| t.format("%Y-%m-%dT%H:%M:%SZ").to_string())
        .unwrap_or_default()
}

impl Report {
    pub fn new(command: &str, seed: u64, config: &impl Serialize) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            config: serde_json::to_value(config).unwrap_or(Value::Null),
            summary: Map::new(),
            tables: Vec::new(),
            generated_at: now_utc(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) {
        self.summary
            .insert(key.into(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("report serializes");
                s.push('\n');
                s
            }
            Format::Table => {
                let mut s = String::new();
                for t in &self.tables {
                    let _ = writeln!(s, "# {}", t.name);
                    s.push_str(&t.to_csv());
                    s.push('\n');
                }
                s
            }
            Format::Text => self.text(),
        }
    }

    fn text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "htm {} | {} | seed {}", self.version, self.command, self.seed);
        let _ = writeln!(s, "{}: {}", TIMESTAMP_FIELD, self.generated_at);
        let _ = writeln!(s, "config: {}", self.config);
        s.push('\n');
        for (k, v) in &self.summary {
            match v {
                Value::Object(_) | Value::Array(_) => {
                    let _ = writeln!(s, "{k}: {v}");
                }
                other => {
                    let _ = writeln!(s, "{k}: {}", cell(other));
                }
            }
        }
        for t in &self.tables {
            let cells: Vec<Vec<String>> = t.rows.iter().map(|r| r.iter().map(cell).collect()).collect();
            let widths: Vec<usize> = (0..t.columns.len())
                .map(|j| {
                    cells
                        .iter()
                        .map(|r| r[j].len())
                        .chain(std::iter::once(t.columns[j].len()))
                        .max()
                        .unwrap_or(0)
                })
                .collect();
            let _ = writeln!(s, "\n[{}]", t.name);
            let line = |vals: &[String]| {
                vals.iter()
                    .zip(&widths)
                    .map(|(v, w)| format!("{v:>w$}"))
                    .collect::<Vec<_>>()
                    .join("  ")
            };
            let _ = writeln!(s, "{}", line(&t.columns));
            for r in &cells {
                let _ = writeln!(s, "{}", line(r));
            }
        }
        s
    }

    /// Writes `<command>.json`, `<command>.txt` and one
    /// `<command>_<table>.csv` per table into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<Vec<String>, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?;
        let mut files = vec![
            (format!("{}.json", self.command), self.render(Format::Json)),
            (format!("{}.txt", self.command), self.render(Format::Text)),
        ];
        for t in &self.tables {
            files.push((format!("{}_{}.csv", self.command, t.name), t.to_csv()));
        }
        let mut written = Vec::new();
        for (name, body) in files {
            let p = dir.join(&name);
            std::fs::write(&p, body).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            written.push(name);
        }
        Ok(written)
    }
}

/// Removes the timestamp line from a rendered report.
pub fn strip_timestamp(rendered: &str) -> String {
    rendered
        .lines()
        .filter(|l| !l.contains(TIMESTAMP_FIELD))
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn renders_all_formats() {
        let mut r = Report::new("demo", 7, &json!({"alpha": 1.5}));
        r.set("verdict", "LRD");
        let mut t = Table::new("values", &["lag", "value"]);
        t.push(vec![json!(1), json!(0.25)]);
        t.push(vec![json!(2), Value::Null]);
        r.tables.push(t);
        let text = r.render(Format::Text);
        assert!(text.contains("verdict: LRD") && text.contains("[values]"));
        assert_eq!(r.tables[0].to_csv(), "lag,value\n1,0.25\n2,NA\n");
        let j: Value = serde_json::from_str(&r.render(Format::Json)).unwrap();
        assert_eq!(j["seed"], 7);
        assert_eq!(j["config"]["alpha"], 1.5);
        assert!(strip_timestamp(&r.render(Format::Json)).find(TIMESTAMP_FIELD).is_none());
    }
}
