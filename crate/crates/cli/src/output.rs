use std::io::Write;

use serde::Serialize;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Shortest decimal that round-trips, the same text `serde_json` emits.
pub fn num(v: f64) -> String {
    match serde_json::Number::from_f64(v) {
        Some(n) => n.to_string(),
        None if v.is_nan() => "NaN".into(),
        None if v > 0.0 => "inf".into(),
        None => "-inf".into(),
    }
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}").map_err(|e| CliError::Io(e.to_string()))
}

pub fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

pub fn write_rows<W: Write>(
    w: W,
    header: &[String],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io(e.to_string());
    let mut wtr = csv_writer(w);
    wtr.write_record(header).map_err(io)?;
    for row in rows {
        wtr.write_record(&row).map_err(io)?;
    }
    wtr.flush().map_err(|e| CliError::Io(e.to_string()))
}

pub fn print_rows(
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), CliError> {
    let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    write_rows(std::io::stdout().lock(), &header, rows)
}
