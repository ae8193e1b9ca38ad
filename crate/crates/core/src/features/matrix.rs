//! Feature-matrix assembly, targets and the leakage guard.

use chrono::{DateTime, Utc};
use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use super::transforms::{
    balance_metrics, change_signals, hours_to_steps, lag_features, rolling_stats, rsi,
    temporal_encodings, Column,
};
use super::FeatureError;
use crate::ingest::{PoolSeries, RawRecord, CADENCE_HOURS};

/// Names that must never appear among the model inputs: identifiers, the
/// timestamp, the current virtual price and anything derived from the
/// forecast horizon.
pub const LEAKAGE_BLACKLIST: [&str; 8] = [
    "timestamp",
    "pool_address",
    "pool_name",
    "source",
    "target_24h",
    "target_return_24h",
    "virtual_price",
    "virtual_price_at_horizon",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureFamily {
    Level,
    Lag,
    Rolling,
    Change,
    Balance,
    Rsi,
    Temporal,
}

impl FeatureFamily {
    pub const ALL: [FeatureFamily; 7] = [
        FeatureFamily::Level,
        FeatureFamily::Lag,
        FeatureFamily::Rolling,
        FeatureFamily::Change,
        FeatureFamily::Balance,
        FeatureFamily::Rsi,
        FeatureFamily::Temporal,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub lag_hours: Vec<u32>,
    pub window_hours: Vec<u32>,
    pub cadence_hours: u32,
    pub cv_epsilon: f64,
    pub rsi_period: usize,
    pub horizon_steps: usize,
    pub families: Vec<FeatureFamily>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            lag_hours: vec![1, 6, 24, 168],
            window_hours: vec![24, 168, 672],
            cadence_hours: CADENCE_HOURS as u32,
            cv_epsilon: 1e-8,
            rsi_period: 14,
            horizon_steps: 4,
            families: FeatureFamily::ALL.to_vec(),
        }
    }
}

impl FeatureConfig {
    pub fn lag_steps(&self) -> Vec<usize> {
        hours_to_steps(&self.lag_hours, self.cadence_hours)
    }

    pub fn window_steps(&self) -> Vec<usize> {
        hours_to_steps(&self.window_hours, self.cadence_hours)
    }

    fn has(&self, family: FeatureFamily) -> bool {
        self.families.contains(&family)
    }

    /// Leading rows dropped so every enabled feature has full history.
    pub fn warmup_rows(&self) -> usize {
        let max_window = self.window_steps().into_iter().max().unwrap_or(0);
        let mut w = 0;
        if self.has(FeatureFamily::Lag) {
            w = w.max(self.lag_steps().into_iter().max().unwrap_or(0));
        }
        if self.has(FeatureFamily::Rolling) || self.has(FeatureFamily::Balance) {
            w = w.max(max_window);
        }
        if self.has(FeatureFamily::Change) || self.has(FeatureFamily::Balance) {
            w = w.max(1);
        }
        if self.has(FeatureFamily::Rsi) {
            w = w.max(self.rsi_period);
        }
        w
    }

    /// Smallest series length that yields at least one usable row.
    pub fn min_series_len(&self) -> usize {
        self.warmup_rows() + self.horizon_steps + 1
    }
}

/// Engineered inputs and 24h-ahead targets for one pool, warm-up and
/// horizon tail removed.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub pool_id: String,
    pub timestamps: Vec<DateTime<Utc>>,
    pub columns: Vec<String>,
    pub families: Vec<FeatureFamily>,
    pub x: Array2<f64>,
    /// Virtual price `horizon_steps` ahead.
    pub y: Vec<f64>,
    /// Percent return to the horizon price.
    pub y_return: Vec<f64>,
    pub warmup_dropped: usize,
    pub horizon_dropped: usize,
    /// Rows whose balances were all zero (ratio emitted as 0).
    pub zero_balance_rows: usize,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    /// A contiguous row slice with the same columns.
    pub fn rows(&self, range: std::ops::Range<usize>) -> FeatureMatrix {
        FeatureMatrix {
            pool_id: self.pool_id.clone(),
            timestamps: self.timestamps[range.clone()].to_vec(),
            columns: self.columns.clone(),
            families: self.families.clone(),
            x: self.x.slice(s![range.clone(), ..]).to_owned(),
            y: self.y[range.clone()].to_vec(),
            y_return: self.y_return[range].to_vec(),
            warmup_dropped: self.warmup_dropped,
            horizon_dropped: self.horizon_dropped,
            zero_balance_rows: self.zero_balance_rows,
        }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// Rejects duplicated names and any blacklisted name.
pub fn check_columns(columns: &[String]) -> Result<(), FeatureError> {
    if let Some(bad) = columns.iter().find(|c| LEAKAGE_BLACKLIST.contains(&c.as_str())) {
        return Err(FeatureError::LeakageColumn(bad.clone()));
    }
    let mut seen = std::collections::HashSet::new();
    for c in columns {
        if !seen.insert(c.as_str()) {
            return Err(FeatureError::DuplicateColumn(c.clone()));
        }
    }
    Ok(())
}

/// `target_24h[t] = virtual_price[t + horizon]` and the percent return to
/// it, for `t` in `0..len - horizon`.
pub fn build_targets(series: &PoolSeries, horizon_steps: usize) -> Result<(Vec<f64>, Vec<f64>), FeatureError> {
    let n = series.len();
    if horizon_steps == 0 || n <= horizon_steps {
        return Err(FeatureError::SeriesTooShort {
            needed: horizon_steps + 1,
            got: n,
        });
    }
    let vp = series.column(|r| r.virtual_price);
    let y: Vec<f64> = (0..n - horizon_steps).map(|t| vp[t + horizon_steps]).collect();
    let y_return = y
        .iter()
        .zip(&vp)
        .map(|(target, now)| (target / now - 1.0) * 100.0)
        .collect();
    Ok((y, y_return))
}

type Extract = fn(&RawRecord) -> f64;

/// Raw scalar series and whether the log-change channel applies (strictly
/// positive by schema).
const SCALAR_SERIES: [(&str, Extract, bool); 4] = [
    ("virtual_price", |r| r.virtual_price, true),
    ("volume_24h", |r| r.volume_24h, false),
    ("apy", |r| r.apy, false),
    ("total_supply", |r| r.total_supply, false),
];

pub fn assemble_matrix(series: &PoolSeries, config: &FeatureConfig) -> Result<FeatureMatrix, FeatureError> {
    let n = series.len();
    let needed = config.min_series_len();
    if n < needed {
        return Err(FeatureError::SeriesTooShort { needed, got: n });
    }
    let lags = config.lag_steps();
    let windows = config.window_steps();
    let mut cols: Vec<(FeatureFamily, Column)> = Vec::new();
    let mut push = |family: FeatureFamily, new: Vec<Column>| {
        cols.extend(new.into_iter().map(|c| (family, c)));
    };

    for (name, extract, positive) in SCALAR_SERIES {
        let z = series.column(extract);
        if config.has(FeatureFamily::Level) && name != "virtual_price" {
            push(FeatureFamily::Level, vec![Column::new(name, z.clone())]);
        }
        if config.has(FeatureFamily::Lag) {
            push(FeatureFamily::Lag, lag_features(name, &z, &lags)?);
        }
        if config.has(FeatureFamily::Rolling) {
            push(FeatureFamily::Rolling, rolling_stats(name, &z, &windows, config.cv_epsilon)?);
        }
        if config.has(FeatureFamily::Change) {
            push(FeatureFamily::Change, change_signals(name, &z, positive)?);
        }
    }

    let mut zero_balance_rows = 0;
    if config.has(FeatureFamily::Balance) {
        let metrics: Vec<_> = series.records.iter().map(|r| balance_metrics(&r.balances)).collect();
        let ratio: Vec<f64> = metrics.iter().map(|m| m.ratio).collect();
        let imbalance: Vec<f64> = metrics.iter().map(|m| m.imbalance).collect();
        zero_balance_rows = metrics.iter().filter(|m| m.all_zero).count();
        for (name, z) in [("balance_ratio", ratio), ("balance_imbalance", imbalance)] {
            let mut group = vec![Column::new(name, z.clone())];
            group.extend(change_signals(name, &z, false)?);
            for rolled in rolling_stats(name, &z, &windows, config.cv_epsilon)? {
                if rolled.name.contains("_ma_") {
                    group.push(rolled);
                }
            }
            push(FeatureFamily::Balance, group);
        }
    }

    if config.has(FeatureFamily::Rsi) {
        let vp = series.column(|r| r.virtual_price);
        let name = format!("virtual_price_rsi_{}", config.rsi_period);
        push(FeatureFamily::Rsi, vec![Column::new(name, rsi(&vp, config.rsi_period)?)]);
    }

    if config.has(FeatureFamily::Temporal) {
        push(FeatureFamily::Temporal, temporal_encodings(&series.timestamps()));
    }

    let names: Vec<String> = cols.iter().map(|(_, c)| c.name.clone()).collect();
    check_columns(&names)?;

    let warmup = config.warmup_rows();
    let horizon = config.horizon_steps;
    let rows = n - warmup - horizon;
    let (y_all, ret_all) = build_targets(series, horizon)?;
    let mut x = Array2::<f64>::zeros((rows, cols.len()));
    for (j, (_, col)) in cols.iter().enumerate() {
        for r in 0..rows {
            let v = col.values[warmup + r];
            if !v.is_finite() {
                return Err(FeatureError::NonFinite {
                    column: col.name.clone(),
                    row: warmup + r,
                });
            }
            x[[r, j]] = v;
        }
    }

    Ok(FeatureMatrix {
        pool_id: series.pool_id.clone(),
        timestamps: series.records[warmup..warmup + rows].iter().map(|r| r.timestamp).collect(),
        columns: names,
        families: cols.iter().map(|(f, _)| *f).collect(),
        x,
        y: y_all[warmup..warmup + rows].to_vec(),
        y_return: ret_all[warmup..warmup + rows].to_vec(),
        warmup_dropped: warmup,
        horizon_dropped: horizon,
        zero_balance_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{build_series, parse_timestamp, GridMode};

    pub(crate) fn synthetic_series(n: usize) -> PoolSeries {
        let t0 = parse_timestamp("2024-07-20T18:00:00Z").unwrap();
        let records = (0..n)
            .map(|i| {
                let f = i as f64;
                RawRecord {
                    timestamp: t0 + chrono::Duration::hours(6 * i as i64),
                    pool_address: "0xp".into(),
                    pool_name: "p".into(),
                    source: "test".into(),
                    virtual_price: 1.0 + 0.01 * (f * 0.3).sin(),
                    volume_24h: 1000.0 + 100.0 * (f * 0.7).cos(),
                    apy: 2.0 + (f * 0.11).sin(),
                    total_supply: 1e6 + f,
                    balances: vec![100.0 + (f * 0.2).sin(), 100.0 + (f * 0.5).cos(), 50.0],
                }
            })
            .collect();
        build_series(records, GridMode::Strict).unwrap()
    }

    #[test]
    fn default_layout() {
        let cfg = FeatureConfig::default();
        assert_eq!(cfg.warmup_rows(), 112);
        assert_eq!(cfg.min_series_len(), 117);
        let m = assemble_matrix(&synthetic_series(300), &cfg).unwrap();
        assert_eq!(m.n_rows(), 300 - 116);
        assert_eq!(m.n_features(), 73);
        assert_eq!(m.warmup_dropped, 112);
        check_columns(&m.columns).unwrap();
        assert!(m.x.iter().all(|v| v.is_finite()));
        // Row 0 is raw index 112; its target is raw index 116.
        let s = synthetic_series(300);
        assert_eq!(m.y[0], s.records[116].virtual_price);
        assert_eq!(m.timestamps[0], s.records[112].timestamp);
    }

    #[test]
    fn too_short() {
        let cfg = FeatureConfig::default();
        assert_eq!(
            assemble_matrix(&synthetic_series(116), &cfg).unwrap_err(),
            FeatureError::SeriesTooShort { needed: 117, got: 116 }
        );
        assert_eq!(assemble_matrix(&synthetic_series(117), &cfg).unwrap().n_rows(), 1);
    }

    #[test]
    fn targets() {
        let mut s = synthetic_series(10);
        for r in s.records.iter_mut() {
            r.virtual_price = 1.0;
        }
        s.records[4].virtual_price = 1.02;
        s.records[5].virtual_price = 0.99;
        let (y, ret) = build_targets(&s, 4).unwrap();
        assert_eq!(y.len(), 6);
        assert!((ret[0] - 2.0).abs() < 1e-12);
        assert!((ret[1] + 1.0).abs() < 1e-12);
        assert_eq!(ret[2], 0.0);
        assert!(build_targets(&synthetic_series(4), 4).is_err());
    }

    #[test]
    fn blacklist_is_enforced() {
        let mut names = vec!["apy".to_string(), "target_24h".to_string()];
        assert_eq!(
            check_columns(&names).unwrap_err(),
            FeatureError::LeakageColumn("target_24h".into())
        );
        names[1] = "apy".into();
        assert!(matches!(check_columns(&names), Err(FeatureError::DuplicateColumn(_))));
    }
}
