//! CSV ingestion and output writers.

use std::fs;
use std::path::{Path, PathBuf};

use mip_core::Dataset;
use ndarray::{Array1, Array2};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::args::InputArgs;
use crate::error::{CliError, Result};

/// Parsed input plus the SHA-256 of its bytes.
pub struct Input {
    pub data: Dataset,
    pub digest: String,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_input(args: &InputArgs) -> Result<Input> {
    let path = &args.input;
    let bytes = fs::read(path).map_err(io_err(path))?;
    let digest = hex::encode(Sha256::digest(&bytes));
    let data = parse_dataset(&bytes, args)?;
    Ok(Input { data, digest })
}

/// Parses rows of numbers; the response sits at `args.response_col` and every
/// other column is a predictor.
pub fn parse_dataset(bytes: &[u8], args: &InputArgs) -> Result<Dataset> {
    let path = &args.input;
    let parse_err = |line: u64, column: usize, message: String| CliError::Parse {
        path: path.clone(),
        line,
        column,
        message,
    };
    if !args.delimiter.is_ascii() {
        return Err(CliError::Usage(format!("delimiter '{}' must be a single ASCII character", args.delimiter)));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(args.delimiter as u8)
        .has_headers(!args.no_header)
        .trim(csv::Trim::All)
        .from_reader(bytes);

    let mut width = None;
    let mut values = Vec::new();
    let mut rows = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, 0, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(parse_err(line, record.len(), format!("expected {w} fields, found {}", record.len())));
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, j + 1, format!("'{field}' is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(line, j + 1, format!("'{field}' is not finite")));
            }
            values.push(v);
        }
        rows += 1;
    }
    let width = width.ok_or_else(|| parse_err(1, 0, "no data rows".into()))?;
    if width < 2 {
        return Err(parse_err(1, 1, "need a response column and at least one predictor".into()));
    }
    if args.response_col >= width {
        return Err(CliError::Usage(format!(
            "--response-col {} is out of range for {width} columns",
            args.response_col
        )));
    }
    let all = Array2::from_shape_vec((rows, width), values).expect("rectangular by construction");
    let y: Array1<f64> = all.column(args.response_col).to_owned();
    let keep: Vec<usize> = (0..width).filter(|&j| j != args.response_col).collect();
    let x = all.select(ndarray::Axis(1), &keep);
    Ok(Dataset::new(y, x)?)
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Output {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    write_text(path, &text)
}

/// Rows of already formatted cells.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let out_err = |e: csv::Error| CliError::Output {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut writer = csv::Writer::from_path(path).map_err(out_err)?;
    writer.write_record(header).map_err(out_err)?;
    for row in rows {
        writer.write_record(row).map_err(out_err)?;
    }
    writer.flush().map_err(io_err(path))
}

/// Shortest round-trip representation, in exponent form for very small or
/// large magnitudes; empty for missing values.
pub fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v:?}"))
}

pub fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

pub fn out_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}
