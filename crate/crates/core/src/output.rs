//! CSV and JSON writers. Numbers use Rust's shortest round-trip formatting,
//! so tables are locale-free and bit-exact when read back.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::{Error, Result};

/// Creates `dir`, refusing to reuse a non-empty directory unless `overwrite`.
pub fn prepare_out_dir(dir: &Path, overwrite: bool) -> Result<()> {
    if dir.exists() {
        if !dir.is_dir() {
            return Err(Error::config(
                "--out",
                format!("{} is not a directory", dir.display()),
            ));
        }
        let occupied = std::fs::read_dir(dir)?.next().is_some();
        if occupied && !overwrite {
            return Err(Error::config(
                "--out",
                format!(
                    "{} already exists and is not empty; pass --overwrite",
                    dir.display()
                ),
            ));
        }
    }
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// Row-at-a-time CSV writer that flushes after every row, so an aborted run
/// leaves every completed row on disk.
pub struct CsvSink {
    writer: csv::Writer<File>,
    columns: usize,
}

impl CsvSink {
    pub fn create(path: &Path, header: &[String]) -> Result<Self> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(header)?;
        writer.flush()?;
        Ok(Self {
            writer,
            columns: header.len(),
        })
    }

    pub fn write_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.columns {
            return Err(Error::ShapeMismatch(format!(
                "row of {} values for {} columns",
                row.len(),
                self.columns
            )));
        }
        self.writer
            .write_record(row.iter().map(|x| x.to_string()))?;
        self.writer.flush()?;
        Ok(())
    }
}

pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut sink = CsvSink::create(path, header)?;
    for r in rows {
        sink.write_row(r)?;
    }
    Ok(())
}

/// Reads a numeric CSV written by [`CsvSink`]: header plus rows.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>().map_err(|e| {
                    Error::ShapeMismatch(format!("bad number `{s}` in {}: {e}", path.display()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Pretty JSON with a trailing newline. Struct fields keep declaration order
/// and maps are sorted, so output is stable.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}
