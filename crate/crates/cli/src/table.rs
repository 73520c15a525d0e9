//! Versioned CSV and JSON output.
//!
//! Every CSV table starts with a fixed header row whose first column is
//! `version`; floats are written with 17 significant digits so that they
//! parse back to the same `f64`.

use std::io::Write;

use serde::Serialize;

use crate::config::OutputFormat;
use crate::error::Result;

pub const TABLE_VERSION: u32 = 1;

/// A row of a versioned table.
pub trait TableRow {
    const HEADER: &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

/// `x` with 17 significant digits.
pub fn float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

pub fn write_csv<R: TableRow, W: Write>(rows: &[R], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(R::HEADER)?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<R: Serialize, W: Write>(rows: &[R], out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, rows)?;
    Ok(())
}

pub fn write_table<R: TableRow + Serialize, W: Write>(rows: &[R], format: OutputFormat, mut out: W) -> Result<()> {
    match format {
        OutputFormat::Csv => write_csv(rows, out),
        OutputFormat::Json => {
            write_json(rows, &mut out)?;
            writeln!(out)?;
            Ok(())
        }
    }
}
