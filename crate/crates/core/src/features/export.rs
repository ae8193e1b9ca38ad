use std::io::Write;

use serde::Serialize;

use super::{FeatureConfig, FeatureError, FeatureFamily, FeatureMatrix};
use crate::ingest::format_timestamp;

/// Writes `timestamp`, every feature column, `target_24h` and
/// `target_return_24h`.
pub fn write_feature_csv<W: Write>(m: &FeatureMatrix, writer: W) -> Result<(), FeatureError> {
    let err = |e: csv::Error| FeatureError::Export(e.to_string());
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["timestamp".to_string()];
    header.extend(m.columns.iter().cloned());
    header.push("target_24h".into());
    header.push("target_return_24h".into());
    wtr.write_record(&header).map_err(err)?;
    for r in 0..m.n_rows() {
        let mut row = Vec::with_capacity(header.len());
        row.push(format_timestamp(&m.timestamps[r]));
        row.extend(m.x.row(r).iter().map(|v| v.to_string()));
        row.push(m.y[r].to_string());
        row.push(m.y_return[r].to_string());
        wtr.write_record(&row).map_err(err)?;
    }
    wtr.flush().map_err(|e| FeatureError::Export(e.to_string()))
}

#[derive(Debug, Serialize)]
pub struct ColumnManifest<'a> {
    pub pool_id: &'a str,
    pub columns: Vec<ColumnEntry<'a>>,
    pub lag_steps: Vec<usize>,
    pub window_steps: Vec<usize>,
    pub cadence_hours: u32,
    pub horizon_steps: usize,
    pub warmup_dropped: usize,
    pub rows: usize,
}

#[derive(Debug, Serialize)]
pub struct ColumnEntry<'a> {
    pub name: &'a str,
    pub family: FeatureFamily,
}

/// JSON sidecar listing the columns and the step conversions in effect.
pub fn column_manifest<'a>(m: &'a FeatureMatrix, config: &FeatureConfig) -> ColumnManifest<'a> {
    ColumnManifest {
        pool_id: &m.pool_id,
        columns: m
            .columns
            .iter()
            .zip(&m.families)
            .map(|(name, family)| ColumnEntry { name, family: *family })
            .collect(),
        lag_steps: config.lag_steps(),
        window_steps: config.window_steps(),
        cadence_hours: config.cadence_hours,
        horizon_steps: config.horizon_steps,
        warmup_dropped: m.warmup_dropped,
        rows: m.n_rows(),
    }
}
