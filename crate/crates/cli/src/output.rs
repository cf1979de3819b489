//! Record persistence. Files are merged rather than appended blindly: rows
//! with a key already on disk are replaced, and the result is rewritten
//! sorted by key, so repeated runs are idempotent.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use su2qlm::record::{MeasurementRecord, RecordKey};

use crate::config::Format;
use crate::CliError;

pub const RECORDS_CSV: &str = "records.csv";
pub const RECORDS_JSONL: &str = "records.jsonl";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    NotConverged,
    Failed,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::NotConverged => "not-converged",
            Status::Failed => "failed",
        }
    }
}

/// One line of output: a record, or the reason a point has none.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputRow {
    pub key: RecordKey,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record: Option<MeasurementRecord>,
}

impl OutputRow {
    pub fn from_record(record: MeasurementRecord) -> Self {
        let status = if record.converged { Status::Ok } else { Status::NotConverged };
        OutputRow { key: record.key, status, error: None, record: Some(record) }
    }

    pub fn failed(key: RecordKey, error: String) -> Self {
        OutputRow { key, status: Status::Failed, error: Some(error), record: None }
    }
}

pub const CSV_HEADER: [&str; 14] = [
    "L",
    "N_M",
    "t",
    "chi",
    "seed",
    "g1",
    "eps",
    "energy",
    "converged",
    "truncation_max",
    "S_mid",
    "zeta",
    "status",
    "error",
];

fn num(x: f64) -> String {
    format!("{x}")
}

fn csv_fields(row: &OutputRow) -> Vec<String> {
    let k = &row.key;
    let mut f = vec![k.len.to_string(), k.n_matter.to_string(), num(k.t), k.chi.to_string(), k.seed.to_string()];
    match &row.record {
        Some(r) => {
            let s_mid = r.entropy.get(r.key.len / 2 - 1).copied().unwrap_or(0.0);
            let zeta = r.zeta_filling().map(num).unwrap_or_default();
            f.extend([
                num(r.g1),
                num(r.eps),
                num(r.energy),
                r.converged.to_string(),
                num(r.truncation_max),
                num(s_mid),
                zeta,
            ]);
        }
        None => f.extend(std::iter::repeat_n(String::new(), 7)),
    }
    f.push(row.status.as_str().to_string());
    f.push(row.error.clone().unwrap_or_default());
    f
}

fn parse_key(fields: &[String]) -> Result<RecordKey, CliError> {
    let bad = || CliError::Malformed(format!("bad key columns {:?}", &fields[..fields.len().min(5)]));
    if fields.len() < 5 {
        return Err(bad());
    }
    Ok(RecordKey {
        len: fields[0].parse().map_err(|_| bad())?,
        n_matter: fields[1].parse().map_err(|_| bad())?,
        t: fields[2].parse().map_err(|_| bad())?,
        chi: fields[3].parse().map_err(|_| bad())?,
        seed: fields[4].parse().map_err(|_| bad())?,
    })
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("partial");
    let mut f = std::fs::File::create(&tmp).map_err(io(&tmp))?;
    f.write_all(bytes).map_err(io(&tmp))?;
    f.sync_all().map_err(io(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io(path))
}

/// Merges `rows` into the CSV at `path` and rewrites it sorted by key.
pub fn merge_csv(path: &Path, rows: &[OutputRow]) -> Result<(), CliError> {
    let mut all: Vec<(RecordKey, Vec<String>)> = Vec::new();
    if path.exists() {
        let mut rd = csv::Reader::from_path(path).map_err(|e| CliError::Malformed(e.to_string()))?;
        for rec in rd.records() {
            let fields: Vec<String> = rec.map_err(|e| CliError::Malformed(e.to_string()))?.iter().map(String::from).collect();
            all.push((parse_key(&fields)?, fields));
        }
    }
    for r in rows {
        all.retain(|(k, _)| k.cmp_total(&r.key).is_ne());
        all.push((r.key, csv_fields(r)));
    }
    all.sort_by(|a, b| a.0.cmp_total(&b.0));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(|e| CliError::Io(e.to_string()))?;
    for (_, f) in &all {
        w.write_record(f).map_err(|e| CliError::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    write_atomic(path, &bytes)
}

pub fn read_jsonl(path: &Path) -> Result<Vec<OutputRow>, CliError> {
    let f = std::fs::File::open(path).map_err(io(path))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: OutputRow = serde_json::from_str(&line)
            .map_err(|e| CliError::Malformed(format!("{}:{}: {e}", path.display(), i + 1)))?;
        if let Some(r) = &row.record {
            r.validate().map_err(|e| CliError::Malformed(format!("{}:{}: {e}", path.display(), i + 1)))?;
        }
        out.push(row);
    }
    Ok(out)
}

pub fn merge_jsonl(path: &Path, rows: &[OutputRow]) -> Result<(), CliError> {
    let mut all = if path.exists() { read_jsonl(path)? } else { Vec::new() };
    for r in rows {
        all.retain(|x| x.key.cmp_total(&r.key).is_ne());
        all.push(r.clone());
    }
    all.sort_by(|a, b| a.key.cmp_total(&b.key));
    let mut bytes = Vec::new();
    for r in &all {
        serde_json::to_writer(&mut bytes, r).map_err(|e| CliError::Io(e.to_string()))?;
        bytes.push(b'\n');
    }
    write_atomic(path, &bytes)
}

/// Writes `rows` in every requested format; returns the files touched.
pub fn persist(dir: &Path, formats: &[Format], rows: &[OutputRow]) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut touched = Vec::new();
    for f in formats {
        let path = match f {
            Format::Csv => dir.join(RECORDS_CSV),
            Format::Jsonl => dir.join(RECORDS_JSONL),
        };
        match f {
            Format::Csv => merge_csv(&path, rows)?,
            Format::Jsonl => merge_jsonl(&path, rows)?,
        }
        touched.push(path);
    }
    Ok(touched)
}

/// Records from JSON-lines files, in file order; rows without a record are skipped.
pub fn load_records(paths: &[PathBuf]) -> Result<Vec<MeasurementRecord>, CliError> {
    let mut out = Vec::new();
    for p in paths {
        out.extend(read_jsonl(p)?.into_iter().filter_map(|r| r.record));
    }
    Ok(out)
}

pub fn checkpoint_name(key: &RecordKey) -> String {
    format!("L{}_N{}_t{}_chi{}_seed{}.mps", key.len, key.n_matter, key.t, key.chi, key.seed)
}
