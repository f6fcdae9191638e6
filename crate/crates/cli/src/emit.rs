//! Field and series records in CSV or JSON, with fixed ordering and
//! 17-significant-digit floats so identical inputs give identical bytes.

use crate::error::{CliError, CliResult};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldRecord {
    pub t: f64,
    pub x: f64,
    pub channel: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRecord {
    pub t: f64,
    pub quantity: String,
    pub value: f64,
}

pub const FIELD_HEADER: [&str; 4] = ["t", "x", "channel", "value"];
pub const SERIES_HEADER: [&str; 3] = ["t", "quantity", "value"];

/// `{:.16e}`: 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn sort_fields(records: &mut [FieldRecord]) {
    records.sort_by(field_order);
}

pub fn sort_series(records: &mut [SeriesRecord]) {
    records.sort_by(|a, b| a.t.total_cmp(&b.t).then_with(|| a.quantity.cmp(&b.quantity)));
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Config(format!("csv: {e}"))
}

fn rows_to_csv<const N: usize>(header: [&str; N], rows: impl Iterator<Item = [String; N]>) -> CliResult<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Config(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

fn rows_to_json<const N: usize>(header: [&str; N], rows: impl Iterator<Item = [String; N]>) -> String {
    let mut out = String::from("[");
    let mut first = true;
    for r in rows {
        out.push_str(if first { "\n  {" } else { ",\n  {" });
        first = false;
        let body: Vec<String> = header.iter().zip(&r).map(|(k, v)| format!("\"{k}\": {v}")).collect();
        out.push_str(&body.join(", "));
        out.push('}');
    }
    out.push_str(if first { "]\n" } else { "\n]\n" });
    out
}

/// Renders field records in canonical order.
pub fn render_fields(records: &[FieldRecord], format: Format) -> CliResult<String> {
    let mut sorted = records.to_vec();
    sort_fields(&mut sorted);
    match format {
        Format::Csv => rows_to_csv(
            FIELD_HEADER,
            sorted
                .iter()
                .map(|r| [format_float(r.t), format_float(r.x), r.channel.clone(), format_float(r.value)]),
        ),
        Format::Json => Ok(rows_to_json(
            FIELD_HEADER,
            sorted
                .iter()
                .map(|r| [format_float(r.t), format_float(r.x), json_string(&r.channel), format_float(r.value)]),
        )),
    }
}

pub fn render_series(records: &[SeriesRecord], format: Format) -> CliResult<String> {
    let mut sorted = records.to_vec();
    sort_series(&mut sorted);
    match format {
        Format::Csv => rows_to_csv(
            SERIES_HEADER,
            sorted.iter().map(|r| [format_float(r.t), r.quantity.clone(), format_float(r.value)]),
        ),
        Format::Json => Ok(rows_to_json(
            SERIES_HEADER,
            sorted.iter().map(|r| [format_float(r.t), json_string(&r.quantity), format_float(r.value)]),
        )),
    }
}

fn check_finite(values: impl Iterator<Item = f64>, path: &Path) -> CliResult<()> {
    for v in values {
        if !v.is_finite() {
            return Err(CliError::Invariant(format!("non-finite value destined for {}", path.display())));
        }
    }
    Ok(())
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn emit_fields(records: &[FieldRecord], format: Format, path: &Path) -> CliResult<()> {
    check_finite(records.iter().flat_map(|r| [r.t, r.x, r.value]), path)?;
    write(path, &render_fields(records, format)?)
}

pub fn emit_series(records: &[SeriesRecord], format: Format, path: &Path) -> CliResult<()> {
    check_finite(records.iter().flat_map(|r| [r.t, r.value]), path)?;
    write(path, &render_series(records, format)?)
}

fn parse_float(s: &str) -> CliResult<f64> {
    s.parse().map_err(|_| CliError::Config(format!("not a number: {s:?}")))
}

pub fn read_fields(text: &str, format: Format) -> CliResult<Vec<FieldRecord>> {
    match format {
        Format::Json => serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string())),
        Format::Csv => {
            let mut rd = csv::Reader::from_reader(text.as_bytes());
            let mut out = Vec::new();
            for row in rd.records() {
                let row = row.map_err(csv_err)?;
                out.push(FieldRecord {
                    t: parse_float(&row[0])?,
                    x: parse_float(&row[1])?,
                    channel: row[2].to_string(),
                    value: parse_float(&row[3])?,
                });
            }
            Ok(out)
        }
    }
}

pub fn read_series(text: &str, format: Format) -> CliResult<Vec<SeriesRecord>> {
    match format {
        Format::Json => serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string())),
        Format::Csv => {
            let mut rd = csv::Reader::from_reader(text.as_bytes());
            let mut out = Vec::new();
            for row in rd.records() {
                let row = row.map_err(csv_err)?;
                out.push(SeriesRecord {
                    t: parse_float(&row[0])?,
                    quantity: row[1].to_string(),
                    value: parse_float(&row[2])?,
                });
            }
            Ok(out)
        }
    }
}

/// Orders `a` before `b` when it belongs earlier in a field file.
pub fn field_order(a: &FieldRecord, b: &FieldRecord) -> Ordering {
    a.t.total_cmp(&b.t)
        .then_with(|| a.x.total_cmp(&b.x))
        .then_with(|| a.channel.cmp(&b.channel))
}
