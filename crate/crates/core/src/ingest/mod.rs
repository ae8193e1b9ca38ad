//! Raw pool records: loading, fetching, grid validation and chronological
//! splitting.

mod fetch;
mod load;
mod record;
mod series;
mod split;

use chrono::{DateTime, Utc};
use thiserror::Error;

pub use fetch::{encode_response, parse_response, SnapshotClient, SnapshotSource, ENDPOINT_ENV};
pub use load::{load_dir, load_records, write_csv, LoadOutcome, RecordFormat};
pub use record::{format_timestamp, parse_timestamp, RawRecord, REQUIRED_COLUMNS};
pub use series::{build_series, cadence, GridMode, PoolSeries, CADENCE_HOURS};
pub use split::{chronological_split, SplitIndex};

/// Why a single input row was rejected.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RowErrorKind {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("unparseable timestamp {0:?}")]
    UnparseableTimestamp(String),
    #[error("{field} must be non-negative (virtual_price positive), got {value}")]
    NegativeQuantity { field: String, value: f64 },
    #[error("malformed row: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {kind}")]
pub struct RowError {
    pub line: u64,
    pub kind: RowErrorKind,
}

#[derive(Debug, PartialEq, Error)]
pub enum IngestError {
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("csv error in {path}: {message}")]
    Csv { path: String, message: String },
    #[error("line {line}: missing column `{column}`")]
    MissingColumn { line: u64, column: String },
    #[error(transparent)]
    Row(RowError),
    #[error("no records")]
    EmptyInput,
    #[error("records from more than one pool: {expected} and {found}")]
    MixedPools { expected: String, found: String },
    #[error("record at {timestamp} has {found} balances, expected {expected}")]
    BalanceArity {
        timestamp: DateTime<Utc>,
        expected: usize,
        found: usize,
    },
    #[error("missing grid slot at {0}")]
    GridGap(DateTime<Utc>),
    #[error("timestamp {0} is not on the 6-hour grid")]
    OffGrid(DateTime<Utc>),
    #[error("split ratio must lie strictly between 0 and 1, got {0}")]
    InvalidRatio(f64),
    #[error("split of {n_rows} rows at ratio {ratio} leaves an empty partition")]
    DegenerateSplit { n_rows: usize, ratio: f64 },
    #[error("network unavailable: {0}")]
    NetworkUnavailable(String),
    #[error("HTTP {code} from {url}")]
    HttpStatus { url: String, code: u16 },
    #[error("response schema drift: {0}")]
    SchemaDrift(String),
}

impl IngestError {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, e: std::io::Error) -> Self {
        IngestError::Io {
            path: path.as_ref().display().to_string(),
            message: e.to_string(),
        }
    }
}
