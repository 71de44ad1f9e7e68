//! Matrix and trace CSV files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::divergence::ZERO_CLAMP;
use crate::error::{FaError, Result};
use crate::kernel::CovMatrix;
use crate::solvers::{SolverTrace, TraceRecord};

/// Column order of trace files.
pub const TRACE_HEADER: [&str; 7] = ["iter", "divergence", "l2", "gain", "r_H", "r_D", "min_D"];

fn csv_err(e: csv::Error) -> FaError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => FaError::Io(io),
        other => FaError::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}

/// Full round-trip precision: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Reads a row-major numeric CSV without header.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if let Some(first) = rows.first() {
            if record.len() != first.len() {
                return Err(FaError::Parse {
                    line,
                    message: format!("expected {} fields, found {}", first.len(), record.len()),
                });
            }
        }
        let row = record
            .iter()
            .map(|field| {
                field.parse::<f64>().map_err(|_| FaError::Parse {
                    line,
                    message: format!("not a number: {field:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(FaError::Parse {
            line: 1,
            message: "empty matrix file".into(),
        });
    }
    let cols = rows[0].len();
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// Reads a matrix and validates it as symmetric PSD.
pub fn read_cov(path: impl AsRef<Path>) -> Result<CovMatrix> {
    CovMatrix::new_psd(read_matrix(path)?)
}

pub fn write_matrix(m: &DMatrix<f64>, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(csv_err)?;
    for i in 0..m.nrows() {
        writer
            .write_record(m.row(i).iter().map(|x| fmt_f64(*x)))
            .map_err(csv_err)?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes a vector as a single column.
pub fn write_vector(v: &DVector<f64>, path: impl AsRef<Path>) -> Result<()> {
    write_matrix(&DMatrix::from_column_slice(v.len(), 1, v.as_slice()), path)
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn trace_row(r: &TraceRecord) -> [String; 7] {
    // report divergences below the clamp as exact zeros
    let div = if r.divergence < ZERO_CLAMP { 0.0 } else { r.divergence };
    [
        r.iter.to_string(),
        fmt_f64(div),
        fmt_f64(r.l2),
        opt(r.gain),
        fmt_f64(r.r_h2),
        fmt_f64(r.r_d),
        fmt_f64(r.min_d),
    ]
}

/// Writes `iter,divergence,l2,gain,r_H,r_D,min_D`; `gain` is empty where not computed.
pub fn write_trace(trace: &SolverTrace, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    writer.write_record(TRACE_HEADER).map_err(csv_err)?;
    for r in &trace.records {
        writer.write_record(trace_row(r)).map_err(csv_err)?;
    }
    writer.flush()?;
    Ok(())
}

/// Per-iteration divergence and L2 columns for several engines side by side.
/// Shorter traces leave their cells empty.
pub fn write_comparison(traces: &[SolverTrace], path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let mut header = vec!["iter".to_string()];
    for t in traces {
        header.push(format!("{}_divergence", t.engine));
        header.push(format!("{}_l2", t.engine));
    }
    writeln!(out, "{}", header.join(","))?;
    let rows = traces.iter().map(|t| t.records.len()).max().unwrap_or(0);
    for i in 0..rows {
        let iter = traces
            .iter()
            .find_map(|t| t.records.get(i).map(|r| r.iter))
            .unwrap_or(i);
        let mut fields = vec![iter.to_string()];
        for t in traces {
            match t.records.get(i) {
                Some(r) => {
                    fields.push(fmt_f64(if r.divergence < ZERO_CLAMP { 0.0 } else { r.divergence }));
                    fields.push(fmt_f64(r.l2));
                }
                None => fields.extend([String::new(), String::new()]),
            }
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    out.flush()?;
    Ok(())
}
