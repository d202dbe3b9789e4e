//! Minimal numeric CSV: comma-separated finite decimals, one optional header line.

use std::fmt::Write as _;
use std::path::Path;

use rulsif::SampleSet;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum HeaderMode {
    /// Treat line 1 as a header if any of its fields is not a number.
    Auto,
    Yes,
    No,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn columns(&self) -> Option<usize> {
        self.rows.first().map(Vec::len).or_else(|| self.header.as_ref().map(Vec::len))
    }
}

fn parse_field(field: &str) -> Option<f64> {
    let v: f64 = field.parse().ok()?;
    v.is_finite().then_some(v)
}

/// Parses `text`; `source` names the input in error messages.
pub fn parse(text: &str, header: HeaderMode, source: &str) -> Result<CsvTable, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut table = CsvTable { header: None, rows: Vec::new() };
    let mut width = None;
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Data(format!("{source}: {e}")))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let lineno = record.position().map_or(k + 1, |p| {
            let bytes = text.as_bytes();
            let mut start = p.byte() as usize;
            while matches!(bytes.get(start), Some(b'\n' | b'\r')) {
                start += 1;
            }
            bytes[..start].iter().filter(|&&b| b == b'\n').count() + 1
        });
        if table.header.is_none() && table.rows.is_empty() {
            let is_header = match header {
                HeaderMode::Yes => true,
                HeaderMode::No => false,
                HeaderMode::Auto => record.iter().any(|f| parse_field(f).is_none()),
            };
            if is_header {
                table.header = Some(record.iter().map(str::to_string).collect());
                width = Some(record.len());
                continue;
            }
        }
        let mut row = Vec::with_capacity(record.len());
        for (col, field) in record.iter().enumerate() {
            let v = parse_field(field).ok_or_else(|| {
                CliError::Data(format!(
                    "{source}: line {lineno}, column {}: '{field}' is not a finite number",
                    col + 1
                ))
            })?;
            row.push(v);
        }
        match width {
            Some(w) if w != row.len() => {
                return Err(CliError::Data(format!(
                    "{source}: line {lineno}: expected {w} columns, found {}",
                    row.len()
                )))
            }
            _ => width = Some(row.len()),
        }
        table.rows.push(row);
    }
    Ok(table)
}

pub fn read_table(path: &Path, header: HeaderMode) -> Result<CsvTable, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    parse(&text, header, &path.display().to_string())
}

/// Reads a non-empty sample set.
pub fn read_samples(path: &Path, header: HeaderMode) -> Result<SampleSet, CliError> {
    let table = read_table(path, header)?;
    if table.rows.is_empty() {
        return Err(CliError::Data(format!("{}: no data rows", path.display())));
    }
    Ok(SampleSet::from_rows(&table.rows)?)
}

/// Reads one label per row: 1/0 or true/false, `true` marking an outlier.
pub fn read_labels(path: &Path, header: HeaderMode) -> Result<Vec<bool>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut labels = Vec::new();
    for (index, line) in text.lines().enumerate() {
        let field = line.trim();
        if field.is_empty() {
            continue;
        }
        let value = match field.to_ascii_lowercase().as_str() {
            "1" | "true" => Some(true),
            "0" | "false" => Some(false),
            _ => None,
        };
        match value {
            Some(v) => labels.push(v),
            None if index == 0 && header != HeaderMode::No => continue,
            None => {
                return Err(CliError::Data(format!(
                    "{}: line {}: '{field}' is not a label (0/1/true/false)",
                    path.display(),
                    index + 1
                )))
            }
        }
    }
    Ok(labels)
}

/// Renders rows of already formatted fields.
pub fn render(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

pub fn write_samples(path: &Path, set: &SampleSet) -> Result<(), CliError> {
    let header: Vec<String> = (1..=set.dim()).map(|k| format!("x{k}")).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = set.rows().map(|r| r.iter().map(f64::to_string).collect()).collect();
    crate::write_file(path, &render(&header, &rows))
}
