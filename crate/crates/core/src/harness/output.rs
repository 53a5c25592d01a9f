//! Result emission.
//!
//! CSV columns follow the field order of [`ResultRecord`]; empty cells mark
//! empirical fields of analytic-only rows. JSON lines carry one record per
//! line with the same keys.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::sweep::ResultRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Jsonl,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "jsonl" | "json-lines" => Ok(OutputFormat::Jsonl),
            _ => Err(Error::Format(format!("unknown output format '{s}'"))),
        }
    }
}

pub fn write_results<W: Write>(records: &[ResultRecord], out: W, format: OutputFormat) -> Result<()> {
    if records.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let fmt_err = |e: &dyn std::fmt::Display| Error::Format(e.to_string());
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in records {
                w.serialize(r).map_err(|e| fmt_err(&e))?;
            }
            w.flush().map_err(|e| fmt_err(&e))?;
        }
        OutputFormat::Jsonl => {
            let mut out = out;
            for r in records {
                serde_json::to_writer(&mut out, r).map_err(|e| fmt_err(&e))?;
                out.write_all(b"\n").map_err(|e| fmt_err(&e))?;
            }
        }
    }
    Ok(())
}

pub fn emit_results(records: &[ResultRecord], path: &Path, format: OutputFormat) -> Result<()> {
    if records.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut buf = Vec::new();
    write_results(records, &mut buf, format)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_jsonl(path: &Path) -> Result<Vec<ResultRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Error::Format(e.to_string())))
        .collect()
}
