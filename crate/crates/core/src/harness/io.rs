//! Persisting study outputs: JSON-lines records, a summary document, and the
//! rate table as CSV.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::OutputFormat;
use super::rate::RateTable;
use super::record::ReplicationRecord;
use super::study::StudyOutcome;
use crate::error::{Error, Result};

pub fn write_records_jsonl(path: &Path, records: &[ReplicationRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_jsonl(path: &Path) -> Result<Vec<ReplicationRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i as u64 + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct CsvRow {
    n: usize,
    s_star: usize,
    mse: f64,
    mse_se: f64,
    lambda0: f64,
    lambda1: f64,
    lambda2: f64,
}

pub fn write_rate_csv<W: Write>(writer: W, table: &RateTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in &table.rows {
        w.serialize(CsvRow {
            n: r.n,
            s_star: r.s_star,
            mse: r.mse,
            mse_se: r.mse_se,
            lambda0: r.lambda0,
            lambda1: r.lambda1,
            lambda2: r.lambda2,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SummaryDoc<'a> {
    summary: &'a super::summary::Summary,
    levels: &'a super::study::Levels,
    lambda2: f64,
    oracle: &'a Option<crate::oracle_lab::OracleReport>,
    rate: &'a Option<RateTable>,
    failed: bool,
}

/// Writes `records.jsonl` and `summary.json` (plus `rate.csv` for rate
/// studies when CSV output is selected) under `dir`; returns written paths.
pub fn write_outcome(dir: &Path, outcome: &StudyOutcome, format: OutputFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let records = dir.join("records.jsonl");
    write_records_jsonl(&records, &outcome.records)?;
    let summary = dir.join("summary.json");
    write_json(
        &summary,
        &SummaryDoc {
            summary: &outcome.summary,
            levels: &outcome.levels,
            lambda2: outcome.lambda2,
            oracle: &outcome.oracle,
            rate: &outcome.rate,
            failed: outcome.failed,
        },
    )?;
    let mut paths = vec![records, summary];
    if let (Some(table), OutputFormat::Csv) = (&outcome.rate, format) {
        let p = dir.join("rate.csv");
        write_rate_csv(File::create(&p)?, table)?;
        paths.push(p);
    }
    Ok(paths)
}
