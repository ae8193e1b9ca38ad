//! File-based record loading (CSV and JSON lines) and CSV writing.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use super::record::{format_timestamp, parse_number, parse_timestamp, REQUIRED_COLUMNS};
use super::{IngestError, RawRecord, RowError, RowErrorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFormat {
    Csv,
    JsonLines,
    /// A stored snapshot-API response body (JSON array of objects).
    ApiResponse,
}

impl RecordFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "csv" => Some(RecordFormat::Csv),
            "jsonl" | "ndjson" => Some(RecordFormat::JsonLines),
            "json" => Some(RecordFormat::ApiResponse),
            _ => None,
        }
    }
}

/// Records grouped by pool address, plus every rejected row.
#[derive(Debug, Default)]
pub struct LoadOutcome {
    pub pools: BTreeMap<String, Vec<RawRecord>>,
    pub errors: Vec<RowError>,
}

impl LoadOutcome {
    fn push(&mut self, record: RawRecord) {
        self.pools
            .entry(record.pool_address.clone())
            .or_default()
            .push(record);
    }

    fn merge(&mut self, other: LoadOutcome) {
        for (pool, records) in other.pools {
            self.pools.entry(pool).or_default().extend(records);
        }
        self.errors.extend(other.errors);
    }

    pub fn record_count(&self) -> usize {
        self.pools.values().map(Vec::len).sum()
    }
}

pub fn load_records(path: impl AsRef<Path>, format: RecordFormat) -> Result<LoadOutcome, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    match format {
        RecordFormat::Csv => read_csv(file, path),
        RecordFormat::JsonLines => read_json_lines(BufReader::new(file), path),
        RecordFormat::ApiResponse => {
            let body = std::fs::read(path).map_err(|e| IngestError::io(path, e))?;
            let records = super::fetch::parse_response(&body)?;
            let mut outcome = LoadOutcome::default();
            for r in records {
                outcome.push(r);
            }
            Ok(outcome)
        }
    }
}

/// Loads every recognized file in a directory, in file-name order.
pub fn load_dir(dir: impl AsRef<Path>) -> Result<LoadOutcome, IngestError> {
    let dir = dir.as_ref();
    let mut files: Vec<(PathBuf, RecordFormat)> = std::fs::read_dir(dir)
        .map_err(|e| IngestError::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter_map(|p| RecordFormat::from_path(&p).map(|f| (p, f)))
        .collect();
    files.sort_by(|a, b| a.0.cmp(&b.0));
    let mut outcome = LoadOutcome::default();
    for (path, format) in files {
        outcome.merge(load_records(&path, format)?);
    }
    Ok(outcome)
}

fn balance_columns(headers: &csv::StringRecord) -> Vec<(usize, usize)> {
    let mut cols: Vec<(usize, usize)> = headers
        .iter()
        .enumerate()
        .filter_map(|(pos, name)| {
            name.strip_prefix("balance_")
                .and_then(|k| k.parse::<usize>().ok())
                .map(|k| (k, pos))
        })
        .collect();
    cols.sort();
    cols
}

fn read_csv<R: std::io::Read>(reader: R, path: &Path) -> Result<LoadOutcome, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut outcome = LoadOutcome::default();
    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        // An empty file has no header row and no records.
        Err(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => {
            return Err(IngestError::Csv {
                path: path.display().to_string(),
                message: e.to_string(),
            })
        }
        Err(_) => return Ok(outcome),
    };
    if headers.is_empty() {
        return Ok(outcome);
    }
    let mut index = [0usize; REQUIRED_COLUMNS.len()];
    for (slot, name) in index.iter_mut().zip(REQUIRED_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::MissingColumn {
                line: 1,
                column: name.into(),
            })?;
    }
    let balance_cols = balance_columns(&headers);

    for result in rdr.records() {
        let row = match result {
            Ok(row) => row,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                outcome.errors.push(RowError {
                    line,
                    kind: RowErrorKind::Malformed(e.to_string()),
                });
                continue;
            }
        };
        let line = row.position().map_or(0, |p| p.line());
        match csv_row_to_record(&row, &index, &balance_cols) {
            Ok(record) => outcome.push(record),
            Err(kind) => outcome.errors.push(RowError { line, kind }),
        }
    }
    Ok(outcome)
}

fn csv_row_to_record(
    row: &csv::StringRecord,
    index: &[usize; REQUIRED_COLUMNS.len()],
    balance_cols: &[(usize, usize)],
) -> Result<RawRecord, RowErrorKind> {
    let cell = |i: usize| -> Result<&str, RowErrorKind> {
        match row.get(index[i]) {
            Some(s) if !s.is_empty() => Ok(s),
            _ => Err(RowErrorKind::MissingColumn(REQUIRED_COLUMNS[i].into())),
        }
    };
    let number = |i: usize| parse_number(REQUIRED_COLUMNS[i], cell(i)?);
    let mut balances = Vec::with_capacity(balance_cols.len());
    for &(k, pos) in balance_cols {
        let name = format!("balance_{k}");
        match row.get(pos) {
            Some(s) if !s.is_empty() => balances.push(parse_number(&name, s)?),
            _ => return Err(RowErrorKind::MissingColumn(name)),
        }
    }
    let record = RawRecord {
        timestamp: parse_timestamp(cell(0)?)?,
        pool_address: cell(1)?.to_string(),
        pool_name: cell(2)?.to_string(),
        source: cell(3)?.to_string(),
        virtual_price: number(4)?,
        volume_24h: number(5)?,
        apy: number(6)?,
        total_supply: number(7)?,
        balances,
    };
    record.validate()?;
    Ok(record)
}

fn read_json_lines<R: BufRead>(reader: R, path: &Path) -> Result<LoadOutcome, IngestError> {
    let mut outcome = LoadOutcome::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line.map_err(|e| IngestError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<serde_json::Value>(&line)
            .map_err(|e| RowErrorKind::Malformed(e.to_string()))
            .and_then(|v| match v {
                serde_json::Value::Object(obj) => RawRecord::from_json(&obj),
                _ => Err(RowErrorKind::Malformed("expected a JSON object".into())),
            });
        match parsed {
            Ok(record) => outcome.push(record),
            Err(kind) => outcome.errors.push(RowError { line: line_no, kind }),
        }
    }
    Ok(outcome)
}

/// Writes records in the input CSV schema. All records must carry the same
/// number of balances.
pub fn write_csv<W: Write>(writer: W, records: &[RawRecord]) -> Result<(), IngestError> {
    let n_bal = records.first().map_or(0, |r| r.balances.len());
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = REQUIRED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((0..n_bal).map(|k| format!("balance_{k}")));
    let csv_err = |e: csv::Error| IngestError::Csv {
        path: "<writer>".into(),
        message: e.to_string(),
    };
    wtr.write_record(&header).map_err(csv_err)?;
    for r in records {
        let mut row = vec![
            format_timestamp(&r.timestamp),
            r.pool_address.clone(),
            r.pool_name.clone(),
            r.source.clone(),
            r.virtual_price.to_string(),
            r.volume_24h.to_string(),
            r.apy.to_string(),
            r.total_supply.to_string(),
        ];
        row.extend(r.balances.iter().map(|b| b.to_string()));
        wtr.write_record(&row).map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| IngestError::io("<writer>", e))?;
    Ok(())
}
