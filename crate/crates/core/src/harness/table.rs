//! Result tables and their CSV/JSON persistence.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::SystemTime;

use serde_json::{Map, Value};

use crate::error::{Error, Result};

use super::config::Experiment;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            // `{}` on f64 is the shortest round-trip representation.
            Cell::Num(v) => format!("{v}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => serde_json::Number::from_f64(*v).map(Value::Number).unwrap_or(Value::Null),
            Cell::Int(v) => Value::from(*v),
            Cell::Text(s) => Value::from(s.clone()),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Int(v) => Some(*v as f64),
            Cell::Text(_) => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Row {
    Ok(Vec<Cell>),
    /// A grid point whose computation failed; the sweep carries on.
    Failed { index: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::Config(format!("unknown format `{s}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ResultTable {
    pub experiment: Experiment,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
    pub config_hash: String,
    pub code_version: String,
    /// Kept in memory only so that persisted outputs stay byte-identical.
    pub generated_at: SystemTime,
}

impl ResultTable {
    pub fn new(experiment: Experiment, columns: &[&str], config_hash: String) -> Self {
        Self {
            experiment,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            config_hash,
            code_version: CODE_VERSION.to_string(),
            generated_at: SystemTime::now(),
        }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn ok_rows(&self) -> impl Iterator<Item = &Vec<Cell>> {
        self.rows.iter().filter_map(|r| match r {
            Row::Ok(cells) => Some(cells),
            Row::Failed { .. } => None,
        })
    }

    pub fn failures(&self) -> impl Iterator<Item = (usize, &str)> {
        self.rows.iter().filter_map(|r| match r {
            Row::Failed { index, message } => Some((*index, message.as_str())),
            Row::Ok(_) => None,
        })
    }

    /// Numeric values of one column over the successful rows.
    pub fn values(&self, name: &str) -> Result<Vec<f64>> {
        let c = self.column(name).ok_or_else(|| Error::Config(format!("no column `{name}`")))?;
        Ok(self.ok_rows().filter_map(|r| r[c].as_f64()).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# config_hash={}", self.config_hash);
        let _ = writeln!(out, "# code_version={}", self.code_version);
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            match row {
                Row::Ok(cells) => {
                    let line: Vec<String> = cells.iter().map(Cell::csv).collect();
                    let _ = writeln!(out, "{}", line.join(","));
                }
                Row::Failed { index, message } => {
                    let _ = writeln!(out, "# failed row {index}: {}", message.replace('\n', " "));
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = Map::new();
                obj.insert("config_hash".into(), Value::from(self.config_hash.clone()));
                obj.insert("code_version".into(), Value::from(self.code_version.clone()));
                match row {
                    Row::Ok(cells) => {
                        for (name, cell) in self.columns.iter().zip(cells) {
                            obj.insert(name.clone(), cell.json());
                        }
                    }
                    Row::Failed { index, message } => {
                        obj.insert("failed_row".into(), Value::from(*index));
                        obj.insert("error".into(), Value::from(message.clone()));
                    }
                }
                Value::Object(obj)
            })
            .collect();
        let mut text = serde_json::to_string_pretty(&Value::Array(rows)).expect("rows serialize");
        text.push('\n');
        text
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    /// Writes `<dir>/<experiment>/<hash>.<ext>` and returns the path.
    pub fn write(&self, dir: &Path, format: Format) -> Result<PathBuf> {
        let sub = dir.join(self.experiment.as_str());
        fs::create_dir_all(&sub)?;
        let path = sub.join(format!("{}.{}", self.config_hash, format.extension()));
        fs::write(&path, self.render(format))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> ResultTable {
        let mut t = ResultTable::new(Experiment::QfiScan, &["a", "b"], "abc".into());
        t.rows.push(Row::Ok(vec![Cell::Num(0.1), Cell::Int(3)]));
        t.rows.push(Row::Failed { index: 1, message: "boom".into() });
        t
    }

    #[test]
    fn csv_layout() {
        let t = table();
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# config_hash=abc");
        assert!(lines[1].starts_with("# code_version="));
        assert_eq!(lines[2], "a,b");
        assert_eq!(lines[3], "0.1,3");
        assert_eq!(lines[4], "# failed row 1: boom");
    }

    #[test]
    fn json_rows_carry_hash() {
        let v: Value = serde_json::from_str(&table().to_json()).unwrap();
        let arr = v.as_array().unwrap();
        assert_eq!(arr.len(), 2);
        assert!(arr.iter().all(|r| r["config_hash"] == "abc"));
        assert_eq!(arr[0]["b"], 3);
        assert_eq!(arr[1]["error"], "boom");
    }

    #[test]
    fn write_uses_experiment_and_hash() {
        let dir = std::env::temp_dir().join(format!("spinforge-table-{}", std::process::id()));
        let path = table().write(&dir, Format::Csv).unwrap();
        assert!(path.ends_with("qfi_scan/abc.csv"));
        assert!(fs::read_to_string(&path).unwrap().starts_with("# config_hash=abc"));
        fs::remove_dir_all(&dir).unwrap();
    }
}
