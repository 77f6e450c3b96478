//! Rendering of tables and summaries: CSV with a header row, JSON, and
//! numbers at six significant digits unless full precision is requested.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Precision {
    pub full: bool,
}

impl Precision {
    /// Shortest decimal that round-trips the value, after rounding to six
    /// significant digits when not in full-precision mode.
    pub fn fmt(&self, x: f64) -> String {
        if !x.is_finite() {
            return if x.is_nan() {
                "NaN".into()
            } else if x > 0.0 {
                "inf".into()
            } else {
                "-inf".into()
            };
        }
        format!("{}", self.round(x))
    }

    pub fn round(&self, x: f64) -> f64 {
        if self.full || x == 0.0 || !x.is_finite() {
            return x;
        }
        format!("{x:.5e}").parse().unwrap_or(x)
    }

    fn round_value(&self, v: &mut Value) {
        match v {
            Value::Number(n) if n.is_f64() => {
                if let Some(r) = n.as_f64().map(|x| self.round(x)).and_then(serde_json::Number::from_f64) {
                    *n = r;
                }
            }
            Value::Array(items) => items.iter_mut().for_each(|i| self.round_value(i)),
            Value::Object(map) => map.values_mut().for_each(|i| self.round_value(i)),
            _ => {}
        }
    }

    pub fn json<T: Serialize>(&self, value: &T) -> Result<String> {
        let mut v = serde_json::to_value(value).map_err(|e| crate::Error::Io(e.to_string()))?;
        self.round_value(&mut v);
        let mut s = serde_json::to_string_pretty(&v).map_err(|e| crate::Error::Io(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }
}

/// A CSV table built row by row from already formatted cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push<S: Into<String>>(&mut self, row: impl IntoIterator<Item = S>) {
        let row: Vec<String> = row.into_iter().map(Into::into).collect();
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| crate::Error::Io(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Plot-ready long-format series: `series,x,y`.
#[derive(Debug, Clone, Default)]
pub struct Series {
    points: Vec<(String, f64, f64)>,
}

impl Series {
    pub fn push(&mut self, series: impl Into<String>, x: f64, y: f64) {
        self.points.push((series.into(), x, y));
    }

    pub fn to_table(&self, p: Precision) -> Table {
        let mut t = Table::new(["series", "x", "y"]);
        for (s, x, y) in &self.points {
            t.push([s.clone(), p.fmt(*x), p.fmt(*y)]);
        }
        t
    }
}

/// Where command output goes. The primary artefact is printed to stdout
/// when no directory is set; with a directory every artefact is written
/// there.
#[derive(Debug, Clone)]
pub struct Sink {
    dir: Option<PathBuf>,
    written: Vec<PathBuf>,
}

impl Sink {
    pub fn new(dir: Option<PathBuf>) -> Result<Self> {
        if let Some(d) = &dir {
            fs::create_dir_all(d)?;
        }
        Ok(Self { dir, written: Vec::new() })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn primary(&mut self, name: &str, content: &str) -> Result<()> {
        match &self.dir {
            Some(_) => self.secondary(name, content),
            None => {
                print!("{content}");
                Ok(())
            }
        }
    }

    pub fn secondary(&mut self, name: &str, content: &str) -> Result<()> {
        if let Some(d) = &self.dir {
            let path = d.join(name);
            fs::write(&path, content)?;
            self.written.push(path);
        }
        Ok(())
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}
