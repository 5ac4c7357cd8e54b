//! Tables and their CSV / NDJSON serialization.

use std::io::{self, Write};

use serde_json::{Map, Value as Json};

use crate::config::{Format, SweepConfig};

/// Significant digits of every printed floating value.
pub const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    /// Not applicable at this point; an empty CSV field or JSON `null`.
    Empty,
}

impl Cell {
    pub fn opt(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }

    fn csv_field(&self) -> String {
        match self {
            Cell::Num(v) => format_number(*v),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Json {
        match self {
            Cell::Num(v) if v.is_finite() => {
                let rounded: f64 = format_number(*v).parse().expect("formatted numbers parse");
                serde_json::Number::from_f64(rounded).map_or(Json::Null, Json::Number)
            }
            Cell::Num(v) => Json::String(format_number(*v)),
            Cell::Int(i) => Json::from(*i),
            Cell::Text(s) => Json::String(s.clone()),
            Cell::Empty => Json::Null,
        }
    }
}

/// `%.12g`-style formatting: 12 significant digits, trailing zeros dropped,
/// exponent form outside `[1e-5, 1e12)`.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= SIGNIFICANT_DIGITS as i32 {
        format!("{}e{exp}", trim_zeros(mantissa))
    } else {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    /// Numeric failures, each printed as `nan`.
    pub failures: usize,
    /// First failure message, for the exit summary.
    pub first_failure: Option<String>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), ..Self::default() }
    }

    pub fn fail(&mut self, message: String) -> Cell {
        self.failures += 1;
        self.first_failure.get_or_insert(message);
        Cell::Num(f64::NAN)
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }
}

fn version_line() -> String {
    format!("micromaser {}, micromaser-cli {}", micromaser::VERSION, env!("CARGO_PKG_VERSION"))
}

pub fn write_table<W: Write>(out: &mut W, config: &SweepConfig, table: &Table) -> io::Result<()> {
    match config.format {
        Format::Csv => write_csv(out, config, table),
        Format::Ndjson => write_ndjson(out, config, table),
    }
}

fn write_csv<W: Write>(out: &mut W, config: &SweepConfig, table: &Table) -> io::Result<()> {
    writeln!(out, "#! {}", version_line())?;
    for line in config.to_lines() {
        writeln!(out, "# {line}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::csv_field))?;
    }
    w.flush()
}

fn write_ndjson<W: Write>(out: &mut W, config: &SweepConfig, table: &Table) -> io::Result<()> {
    let mut meta = Map::new();
    meta.insert("version".into(), Json::String(version_line()));
    let mut params = Map::new();
    for line in config.to_lines() {
        let (k, v) = line.split_once(" = ").expect("metadata lines are key = value");
        params.insert(k.to_string(), Json::String(v.to_string()));
    }
    meta.insert("config".into(), Json::Object(params));
    let mut header = Map::new();
    header.insert("metadata".into(), Json::Object(meta));
    writeln!(out, "{}", Json::Object(header))?;
    for row in &table.rows {
        let record: Map<String, Json> =
            table.columns.iter().zip(row).map(|(c, cell)| (c.to_string(), cell.json())).collect();
        writeln!(out, "{}", Json::Object(record))?;
    }
    out.flush()
}

/// Rebuilds the configuration from the first NDJSON record.
pub fn config_from_ndjson_header(line: &str) -> Result<SweepConfig, String> {
    let header: Json = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let params = header.pointer("/metadata/config").and_then(Json::as_object).ok_or("no metadata.config object")?;
    let mut text = String::new();
    for (k, v) in params {
        text.push_str(&format!("{k} = {}\n", v.as_str().ok_or("config values are strings")?));
    }
    crate::config::parse_config(&text).map_err(|e| e.to_string())
}
