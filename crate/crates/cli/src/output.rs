//! Tabular output in three renderings: aligned text, CSV and JSON.

use std::fmt::Write as _;

use clap::ValueEnum;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
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

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(if v { "yes" } else { "no" }.into())
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(title: impl Into<String>, columns: &[&str]) -> Self {
        Table {
            title: title.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Default::default()
        }
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    fn text(cell: &Cell, full: bool) -> String {
        match cell {
            Cell::Num(v) if full => format!("{v:.16e}"),
            Cell::Num(v) => format!("{v:.6}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let mut m = Map::new();
                for (c, cell) in self.columns.iter().zip(r) {
                    let v = match cell {
                        Cell::Num(x) => serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number),
                        Cell::Int(i) => Value::from(*i),
                        Cell::Text(s) => Value::String(s.clone()),
                        Cell::Empty => Value::Null,
                    };
                    m.insert(c.clone(), v);
                }
                Value::Object(m)
            })
            .collect();
        serde_json::json!({ "title": self.title, "rows": rows, "notes": self.notes })
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => serde_json::to_string_pretty(&self.to_json()).expect("table serializes") + "\n",
            Format::Csv => {
                let mut out = self.columns.join(",") + "\n";
                for r in &self.rows {
                    let cells: Vec<String> = r.iter().map(|c| csv_escape(&Self::text(c, true))).collect();
                    out += &cells.join(",");
                    out.push('\n');
                }
                out
            }
            Format::Table => {
                let cells: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(|c| Self::text(c, false)).collect()).collect();
                let widths: Vec<usize> = (0..self.columns.len())
                    .map(|j| cells.iter().map(|r| r[j].len()).chain([self.columns[j].len()]).max().unwrap_or(0))
                    .collect();
                let mut out = String::new();
                if !self.title.is_empty() {
                    writeln!(out, "{}", self.title).unwrap();
                }
                let line = |vals: &[String]| {
                    vals.iter()
                        .zip(&widths)
                        .enumerate()
                        .map(|(j, (v, w))| if j == 0 { format!("{v:<w$}") } else { format!("{v:>w$}") })
                        .collect::<Vec<_>>()
                        .join("  ")
                };
                writeln!(out, "{}", line(&self.columns)).unwrap();
                writeln!(out, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  ")).unwrap();
                for r in &cells {
                    writeln!(out, "{}", line(r)).unwrap();
                }
                for n in &self.notes {
                    writeln!(out, "{n}").unwrap();
                }
                out
            }
        }
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
