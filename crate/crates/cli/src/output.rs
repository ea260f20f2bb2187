use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::Format;
use crate::error::CliError;

/// Scientific notation with 16 significant digits.
pub fn sci(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.15e}")
    }
}

/// A typed table cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => sci(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) if v.is_finite() => Value::from(*v),
            Cell::Num(v) => Value::from(sci(*v)),
            Cell::Int(v) => Value::from(*v),
            Cell::Bool(b) => Value::from(*b),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

/// Column-named rows; `config_hash` is always the first column.
#[derive(Clone, Debug)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self, hash: &str) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["config_hash".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![hash.to_string()];
            rec.extend(row.iter().map(Cell::csv));
            w.write_record(&rec)?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.to_string()))
    }

    pub fn to_json(&self, hash: &str) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut m = Map::new();
                for (c, v) in self.columns.iter().zip(row) {
                    m.insert(c.clone(), v.json());
                }
                Value::Object(m)
            })
            .collect();
        serde_json::json!({ "config_hash": hash, "rows": rows })
    }
}

/// Writes into the output directory, if one is configured.
pub struct Sink {
    dir: Option<PathBuf>,
    format: Format,
    hash: String,
}

impl Sink {
    pub fn new(dir: Option<&Path>, format: Format, hash: String) -> Result<Self, CliError> {
        if let Some(d) = dir {
            fs::create_dir_all(d).map_err(|e| CliError::Io(format!("cannot create {}: {e}", d.display())))?;
        }
        Ok(Self {
            dir: dir.map(Path::to_path_buf),
            format,
            hash,
        })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn table(&self, stem: &str, table: &Table) -> Result<Option<PathBuf>, CliError> {
        let Some(dir) = &self.dir else { return Ok(None) };
        let (path, bytes) = match self.format {
            Format::Csv => (dir.join(format!("{stem}.csv")), table.to_csv(&self.hash)?),
            Format::Json => (dir.join(format!("{stem}.json")), pretty(&table.to_json(&self.hash))?),
        };
        fs::write(&path, bytes)?;
        Ok(Some(path))
    }

    pub fn json<T: Serialize>(&self, stem: &str, value: &T) -> Result<Option<PathBuf>, CliError> {
        let Some(dir) = &self.dir else { return Ok(None) };
        let path = dir.join(format!("{stem}.json"));
        fs::write(&path, pretty(value)?)?;
        Ok(Some(path))
    }
}

pub fn pretty<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scientific_format_keeps_sixteen_digits() {
        assert_eq!(sci(0.1), "1.000000000000000e-1");
        assert_eq!(sci(-4.786310), "-4.786310000000000e0");
        assert_eq!(sci(f64::NAN), "NaN");
        let back: f64 = sci(std::f64::consts::PI).parse().unwrap();
        assert!((back - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn csv_has_hash_column_and_quotes_text() {
        let mut t = Table::new(&["x", "note"]);
        t.push(vec![1.5.into(), "a, b".into()]);
        t.push(vec![Cell::Empty, Cell::Int(3)]);
        let s = String::from_utf8(t.to_csv("abc").unwrap()).unwrap();
        assert_eq!(s, "config_hash,x,note\nabc,1.500000000000000e0,\"a, b\"\nabc,,3\n");
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = Table::new(&["p"]);
        assert_eq!(String::from_utf8(t.to_csv("h").unwrap()).unwrap(), "config_hash,p\n");
    }

    #[test]
    fn json_rows_are_keyed() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![2.0.into(), true.into()]);
        let v = t.to_json("h");
        assert_eq!(v["config_hash"], "h");
        assert_eq!(v["rows"][0]["a"], 2.0);
        assert_eq!(v["rows"][0]["b"], true);
    }
}
