//! CSV curves and JSON summaries.
//!
//! CSV columns: `trial_id,seed,n,m,model,epoch,aligned_error,raw_error,residual`.
//! Each trial contributes one row per epoch sample, then a summary row with
//! `epoch = final`. Failed trials get only the summary row, with `nan` values.
//! Floats use `{:.17e}` so the text round-trips exactly.

use std::io::Write;
use std::path::Path;

use super::config::OutputFormat;
use super::experiment::TrialRecord;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "trial_id,seed,n,m,model,epoch,aligned_error,raw_error,residual";

fn float(v: Option<f64>) -> String {
    match v {
        Some(v) if v.is_finite() => format!("{v:.17e}"),
        _ => "nan".to_string(),
    }
}

pub fn write_csv<W: Write>(records: &[TrialRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        let prefix = format!("{},{},{},{},{}", r.trial_id, r.seed, r.n, r.m, r.model);
        for s in &r.epochs {
            writeln!(
                out,
                "{prefix},{},{},{},{}",
                s.epoch,
                float(Some(s.aligned_error)),
                float(Some(s.raw_error)),
                float(Some(s.residual))
            )?;
        }
        writeln!(
            out,
            "{prefix},final,{},{},{}",
            float(r.final_aligned_error),
            float(r.final_raw_error),
            float(r.final_residual)
        )?;
    }
    Ok(())
}

pub fn write_json<W: Write>(records: &[TrialRecord], mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, records)?;
    writeln!(out).map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

pub fn render(records: &[TrialRecord], format: OutputFormat) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    match format {
        OutputFormat::Csv => write_csv(records, &mut buf).map_err(|e| Error::io("<buffer>", e))?,
        OutputFormat::Json => write_json(records, &mut buf)?,
    }
    Ok(buf)
}

/// Writes to `path`, or to stdout when `path` is `None`.
pub fn write_records(records: &[TrialRecord], format: OutputFormat, path: Option<&Path>) -> Result<()> {
    let bytes = render(records, format)?;
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| Error::io(p, e)),
        None => std::io::stdout().lock().write_all(&bytes).map_err(|e| Error::io("<stdout>", e)),
    }
}
