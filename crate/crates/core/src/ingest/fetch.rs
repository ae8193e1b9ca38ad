//! Snapshot API client with an offline fixture mode.
//!
//! Live mode issues `GET {endpoint}/pools/{pool_id}/snapshots?from={unix}&to={unix}`
//! and expects a JSON array of record objects (the JSON-lines keys, balances
//! as an array). Fixture mode replays a stored response body from
//! `{dir}/{pool_id}.json` and never touches the network.

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde_json::Value;

use super::{IngestError, RawRecord, RowError, RowErrorKind};

/// Environment variable that overrides the configured endpoint.
pub const ENDPOINT_ENV: &str = "POOLBENCH_ENDPOINT";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SnapshotSource {
    Live { endpoint: String },
    Fixture { dir: PathBuf },
}

pub struct SnapshotClient {
    source: SnapshotSource,
    agent: ureq::Agent,
    // Requests to one endpoint are serialized.
    gate: Mutex<()>,
}

impl SnapshotClient {
    pub fn new(source: SnapshotSource) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(30)))
            .build()
            .into();
        SnapshotClient {
            source,
            agent,
            gate: Mutex::new(()),
        }
    }

    pub fn live(endpoint: impl Into<String>) -> Self {
        Self::new(SnapshotSource::Live {
            endpoint: endpoint.into(),
        })
    }

    pub fn fixture(dir: impl Into<PathBuf>) -> Self {
        Self::new(SnapshotSource::Fixture { dir: dir.into() })
    }

    pub fn source(&self) -> &SnapshotSource {
        &self.source
    }

    pub fn fixture_path(dir: &Path, pool_id: &str) -> PathBuf {
        dir.join(format!("{pool_id}.json"))
    }

    /// Raw response bytes for one pool and window. In fixture mode this is
    /// the stored file, byte for byte.
    pub fn fetch_raw(
        &self,
        pool_id: &str,
        from: DateTime<Utc>,
        to: DateTime<Utc>,
    ) -> Result<Vec<u8>, IngestError> {
        match &self.source {
            SnapshotSource::Fixture { dir } => {
                let path = Self::fixture_path(dir, pool_id);
                std::fs::read(&path).map_err(|e| IngestError::io(&path, e))
            }
            SnapshotSource::Live { endpoint } => {
                let url = format!(
                    "{}/pools/{}/snapshots?from={}&to={}",
                    endpoint.trim_end_matches('/'),
                    pool_id,
                    from.timestamp(),
                    to.timestamp()
                );
                let _guard = self.gate.lock().unwrap_or_else(|p| p.into_inner());
                let mut response = self.agent.get(&url).call().map_err(|e| match e {
                    ureq::Error::StatusCode(code) => IngestError::HttpStatus { url: url.clone(), code },
                    other => IngestError::NetworkUnavailable(other.to_string()),
                })?;
                response
                    .body_mut()
                    .read_to_vec()
                    .map_err(|e| IngestError::NetworkUnavailable(e.to_string()))
            }
        }
    }

    /// Records for `pool_id` with timestamps in `[from, to]`, ascending by
    /// arrival order of the response. An inverted window yields no records.
    pub fn fetch_pool_snapshots(
        &self,
        pool_id: &str,
        from: DateTime<Utc>,
        to: DateTime<Utc>,
    ) -> Result<Vec<RawRecord>, IngestError> {
        if from > to {
            return Ok(Vec::new());
        }
        let body = self.fetch_raw(pool_id, from, to)?;
        let records = parse_response(&body)?;
        Ok(records
            .into_iter()
            .filter(|r| r.timestamp >= from && r.timestamp <= to)
            .collect())
    }
}

/// Parses a snapshot response body. A record lacking a required field means
/// the upstream schema changed and is reported as [`IngestError::SchemaDrift`].
pub fn parse_response(body: &[u8]) -> Result<Vec<RawRecord>, IngestError> {
    let value: Value = serde_json::from_slice(body)
        .map_err(|e| IngestError::SchemaDrift(format!("response is not JSON: {e}")))?;
    let items = match value {
        Value::Array(items) => items,
        Value::Object(mut obj) => match obj.remove("data") {
            Some(Value::Array(items)) => items,
            _ => return Err(IngestError::SchemaDrift("expected an array of records".into())),
        },
        _ => return Err(IngestError::SchemaDrift("expected an array of records".into())),
    };
    items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let obj = item
                .as_object()
                .ok_or_else(|| IngestError::SchemaDrift(format!("item {i} is not an object")))?;
            RawRecord::from_json(obj).map_err(|kind| match kind {
                RowErrorKind::MissingColumn(field) => {
                    IngestError::SchemaDrift(format!("item {i} lacks required field `{field}`"))
                }
                kind => IngestError::Row(RowError {
                    line: i as u64 + 1,
                    kind,
                }),
            })
        })
        .collect()
}

/// Serializes records as a snapshot response body.
pub fn encode_response(records: &[RawRecord]) -> Vec<u8> {
    let items: Vec<Value> = records.iter().map(RawRecord::to_json).collect();
    serde_json::to_vec_pretty(&Value::Array(items)).expect("JSON values always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::record::parse_timestamp;

    fn sample(n: usize) -> Vec<RawRecord> {
        let t0 = parse_timestamp("2024-07-20T18:00:00Z").unwrap();
        (0..n)
            .map(|i| RawRecord {
                timestamp: t0 + chrono::Duration::hours(6 * i as i64),
                pool_address: "0xpool".into(),
                pool_name: "pool".into(),
                source: "fixture".into(),
                virtual_price: 1.0 + i as f64 * 1e-4,
                volume_24h: 10.0,
                apy: 3.0,
                total_supply: 1e6,
                balances: vec![1.0, 2.0],
            })
            .collect()
    }

    #[test]
    fn fixture_replay_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let records = sample(4);
        std::fs::write(
            SnapshotClient::fixture_path(dir.path(), "0xpool"),
            encode_response(&records),
        )
        .unwrap();
        let client = SnapshotClient::fixture(dir.path());
        let (from, to) = (records[0].timestamp, records[3].timestamp);
        let a = client.fetch_raw("0xpool", from, to).unwrap();
        let b = client.fetch_raw("0xpool", from, to).unwrap();
        assert_eq!(a, b);
        let got = client.fetch_pool_snapshots("0xpool", from, to).unwrap();
        assert_eq!(got, records);
    }

    #[test]
    fn inverted_window_is_empty() {
        let client = SnapshotClient::fixture("/nonexistent");
        let t = parse_timestamp("2024-07-20T18:00:00Z").unwrap();
        let got = client
            .fetch_pool_snapshots("0xpool", t, t - chrono::Duration::hours(1))
            .unwrap();
        assert!(got.is_empty());
    }

    #[test]
    fn renamed_field_is_schema_drift() {
        let body = br#"[{"time":"2024-07-20T18:00:00Z","pool_address":"a","pool_name":"b","source":"c",
            "virtual_price":1.0,"volume_24h":1,"apy":1,"total_supply":1,"balances":[1]}]"#;
        assert!(matches!(parse_response(body), Err(IngestError::SchemaDrift(_))));
    }
}
