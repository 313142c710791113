//! Report values and their JSON / CSV renderings.
//!
//! Floats are written with 17 significant digits so they round-trip;
//! infinities become the string "inf" and NaN is rejected.

use std::fmt::Write as _;

use potts_af::ExtReal;

use crate::error::{CliError, CliResult};

pub const SCHEMA: &str = "potts-af/1";

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    List(Vec<Value>),
    Map(Vec<(String, Value)>),
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<ExtReal> for Value {
    fn from(v: ExtReal) -> Self {
        Value::Float(v.to_f64())
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::Int(v as i64)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Str(v.to_string())
    }
}

impl<T: Into<Value>> From<Option<T>> for Value {
    fn from(v: Option<T>) -> Self {
        v.map_or(Value::Null, Into::into)
    }
}

/// Ordered key-value builder.
#[derive(Debug, Clone, Default)]
pub struct Fields(pub Vec<(String, Value)>);

impl Fields {
    pub fn put(mut self, key: &str, v: impl Into<Value>) -> Self {
        self.0.push((key.to_string(), v.into()));
        self
    }
}

impl From<Fields> for Value {
    fn from(f: Fields) -> Self {
        Value::Map(f.0)
    }
}

/// Converts the serialized config echo, reformatting numbers.
pub fn from_json(v: &serde_json::Value) -> Value {
    match v {
        serde_json::Value::Null => Value::Null,
        serde_json::Value::Bool(b) => Value::Bool(*b),
        serde_json::Value::Number(n) => match n.as_i64() {
            Some(i) => Value::Int(i),
            None => match n.as_u64() {
                Some(u) => Value::Str(u.to_string()),
                None => Value::Float(n.as_f64().unwrap_or(f64::NAN)),
            },
        },
        serde_json::Value::String(s) => Value::Str(s.clone()),
        serde_json::Value::Array(a) => Value::List(a.iter().map(from_json).collect()),
        serde_json::Value::Object(o) => Value::Map(o.iter().map(|(k, v)| (k.clone(), from_json(v))).collect()),
    }
}

pub fn format_float(v: f64, path: &str) -> CliResult<String> {
    if v.is_nan() {
        return Err(CliError::NonFinite(path.to_string()));
    }
    if v.is_infinite() {
        return Ok(if v > 0.0 { "inf".into() } else { "-inf".into() });
    }
    Ok(format!("{v:.16e}"))
}

fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn write_json(v: &Value, path: &str, out: &mut String) -> CliResult<()> {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Int(i) => write!(out, "{i}").expect("string write"),
        Value::Float(f) => {
            let s = format_float(*f, path)?;
            if f.is_infinite() {
                out.push_str(&quote(&s));
            } else {
                out.push_str(&s);
            }
        }
        Value::Str(s) => out.push_str(&quote(s)),
        Value::List(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_json(item, &format!("{path}[{i}]"), out)?;
            }
            out.push(']');
        }
        Value::Map(fields) => {
            out.push('{');
            for (i, (k, item)) in fields.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&quote(k));
                out.push(':');
                write_json(item, &format!("{path}.{k}"), out)?;
            }
            out.push('}');
        }
    }
    Ok(())
}

pub fn to_json(v: &Value) -> CliResult<String> {
    let mut s = String::new();
    write_json(v, "$", &mut s)?;
    s.push('\n');
    Ok(s)
}

fn csv_cell(v: &Value, path: &str) -> CliResult<String> {
    Ok(match v {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Int(i) => i.to_string(),
        Value::Float(f) => format_float(*f, path)?,
        Value::Str(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Value::Str(s) => s.clone(),
        other => {
            let mut s = String::new();
            write_json(other, path, &mut s)?;
            format!("\"{}\"", s.replace('"', "\"\""))
        }
    })
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, Value)>) {
    match v {
        Value::Map(fields) => {
            for (k, item) in fields {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, item, out);
            }
        }
        other => out.push((prefix.to_string(), other.clone())),
    }
}

/// A finished command result: metadata, optional summary and a table.
#[derive(Debug, Clone)]
pub struct Report {
    pub command: &'static str,
    pub config: Value,
    pub header: Fields,
    pub result: Fields,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl Report {
    pub fn new(command: &'static str, config: Value) -> Self {
        Self {
            command,
            config,
            header: Fields::default(),
            result: Fields::default(),
            columns: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn render_json(&self) -> CliResult<String> {
        let mut doc =
            Fields::default().put("schema", SCHEMA).put("command", self.command).put("config", self.config.clone());
        doc.0.extend(self.header.0.iter().cloned());
        if !self.result.0.is_empty() {
            doc = doc.put("result", Value::Map(self.result.0.clone()));
        }
        if !self.columns.is_empty() {
            let rows = self
                .rows
                .iter()
                .map(|r| Value::Map(self.columns.iter().map(|c| c.to_string()).zip(r.iter().cloned()).collect()))
                .collect();
            doc = doc.put("rows", Value::List(rows));
        }
        to_json(&doc.into())
    }

    /// Metadata and scalar results as `# key=value` lines, then the table;
    /// scalar-only reports become a one-row table of their results.
    pub fn render_csv(&self) -> CliResult<String> {
        let mut meta = vec![("schema".to_string(), Value::from(SCHEMA)), ("command".into(), self.command.into())];
        flatten("config", &self.config, &mut meta);
        flatten("", &Value::Map(self.header.0.clone()), &mut meta);
        let mut flat_result = Vec::new();
        flatten("", &Value::Map(self.result.0.clone()), &mut flat_result);
        let mut s = String::new();
        let table_mode = !self.columns.is_empty();
        if table_mode {
            for (k, v) in &flat_result {
                meta.push((format!("summary.{k}"), v.clone()));
            }
        }
        for (k, v) in &meta {
            writeln!(s, "# {k}={}", csv_cell(v, k)?).expect("string write");
        }
        if table_mode {
            s.push_str(&self.columns.join(","));
            s.push('\n');
            for (i, row) in self.rows.iter().enumerate() {
                let cells: Vec<String> = row
                    .iter()
                    .zip(&self.columns)
                    .map(|(v, c)| csv_cell(v, &format!("rows[{i}].{c}")))
                    .collect::<CliResult<_>>()?;
                s.push_str(&cells.join(","));
                s.push('\n');
            }
        } else {
            let names: Vec<&str> = flat_result.iter().map(|(k, _)| k.as_str()).collect();
            s.push_str(&names.join(","));
            s.push('\n');
            let cells: Vec<String> = flat_result.iter().map(|(k, v)| csv_cell(v, k)).collect::<CliResult<_>>()?;
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        Ok(s)
    }
}
