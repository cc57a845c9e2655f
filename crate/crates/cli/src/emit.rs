//! CSV and JSON output of trial records.
//!
//! CSV columns are `trial,seed,M_1,...,M_J,mode,status,max_abs_err,candidates,ms`.
//! Floats use the shortest representation that parses back to the same value, and a
//! missing error is an empty field.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::Mode;
use crate::experiment::{TrialRecord, TrialStatus};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

pub fn csv_header(sensors: usize) -> Vec<String> {
    let mut header = vec!["trial".to_string(), "seed".to_string()];
    header.extend((1..=sensors).map(|j| format!("M_{j}")));
    header.extend(["mode", "status", "max_abs_err", "candidates", "ms"].map(String::from));
    header
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Output(e.to_string())
}

pub fn write_csv<W: Write>(records: &[TrialRecord], sensors: usize, out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(sensors)).map_err(csv_error)?;
    for r in records {
        if r.allocation.len() != sensors {
            return Err(CliError::Output(format!(
                "record for trial {} has {} allocation entries, expected {sensors}",
                r.trial,
                r.allocation.len()
            )));
        }
        let mut row = vec![r.trial.to_string(), r.seed.to_string()];
        row.extend(r.allocation.iter().map(ToString::to_string));
        row.push(r.mode.as_str().to_string());
        row.push(r.status.as_str().to_string());
        row.push(r.max_abs_err.map(|e| format!("{e:e}")).unwrap_or_default());
        row.push(r.candidates.to_string());
        row.push(r.ms.to_string());
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush().map_err(|e| CliError::Output(e.to_string()))
}

pub fn write_json<W: Write>(records: &[TrialRecord], mut out: W) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut out, records).map_err(|e| CliError::Output(e.to_string()))?;
    out.write_all(b"\n").map_err(|e| CliError::Output(e.to_string()))
}

/// Parses CSV written by [`write_csv`], returning `J` and the records.
pub fn parse_csv<R: Read>(input: R) -> Result<(usize, Vec<TrialRecord>), CliError> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers().map_err(csv_error)?.clone();
    let sensors = header.len().checked_sub(7).ok_or_else(|| CliError::Output("CSV header too short".into()))?;
    let expected = csv_header(sensors);
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(CliError::Output(format!("unexpected CSV header {header:?}")));
    }
    let bad = |line: u64, what: &str| CliError::Output(format!("CSV line {line}: bad {what}"));
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| row.get(i).unwrap_or("");
        let num = |i: usize, what: &str| field(i).parse::<u64>().map_err(|_| bad(line, what));
        let allocation =
            (0..sensors).map(|j| num(2 + j, "allocation").map(|v| v as usize)).collect::<Result<Vec<_>, _>>()?;
        let k = 2 + sensors;
        let max_abs_err = match field(k + 2) {
            "" => None,
            s => Some(s.parse::<f64>().map_err(|_| bad(line, "max_abs_err"))?),
        };
        records.push(TrialRecord {
            trial: num(0, "trial")? as usize,
            seed: num(1, "seed")?,
            allocation,
            mode: Mode::parse(field(k)).ok_or_else(|| bad(line, "mode"))?,
            status: TrialStatus::parse(field(k + 1)).ok_or_else(|| bad(line, "status"))?,
            max_abs_err,
            candidates: num(k + 3, "candidates")? as usize,
            ms: field(k + 4).parse::<f64>().map_err(|_| bad(line, "ms"))?,
        });
    }
    Ok((sensors, records))
}

/// Writes records to `path`, or to stdout when `path` is `None`.
pub fn emit(records: &[TrialRecord], sensors: usize, format: Format, path: Option<&Path>) -> Result<(), CliError> {
    let write = |out: &mut dyn Write| match format {
        Format::Csv => write_csv(records, sensors, out),
        Format::Json => write_json(records, out),
    };
    match path {
        Some(path) => {
            let file = File::create(path).map_err(|e| CliError::io(path, e))?;
            let mut out = BufWriter::new(file);
            write(&mut out).map_err(|e| match e {
                CliError::Output(msg) => CliError::Output(format!("{}: {msg}", path.display())),
                other => other,
            })?;
            out.flush().map_err(|e| CliError::io(path, e))
        }
        None => write(&mut std::io::stdout().lock()),
    }
}
