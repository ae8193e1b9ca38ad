//! Per-series feature transforms. Every output column has the input's
//! length; entries without enough history are `NaN` (warm-up).

use chrono::{DateTime, Datelike, Timelike, Utc};
use std::f64::consts::TAU;

use super::FeatureError;

/// A named feature vector aligned with the raw series.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

impl Column {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Column {
            name: name.into(),
            values,
        }
    }
}

/// Converts hour-denominated horizons to grid steps (ceiling), removing
/// duplicates. Horizons shorter than one cadence step collapse to one step.
pub fn hours_to_steps(hours: &[u32], cadence_hours: u32) -> Vec<usize> {
    let mut steps: Vec<usize> = hours
        .iter()
        .map(|&h| h.div_ceil(cadence_hours).max(1) as usize)
        .collect();
    steps.sort_unstable();
    steps.dedup();
    steps
}

/// `{name}_lag_{l}[t] = z[t - l]`.
pub fn lag_features(name: &str, z: &[f64], lags: &[usize]) -> Result<Vec<Column>, FeatureError> {
    let max_lag = lags.iter().copied().max().unwrap_or(0);
    if lags.contains(&0) {
        return Err(FeatureError::InvalidParameter(format!("{name}: lag must be positive")));
    }
    if max_lag >= z.len() {
        return Err(FeatureError::LagExceedsSeries {
            lag: max_lag,
            len: z.len(),
        });
    }
    Ok(lags
        .iter()
        .map(|&lag| {
            let values = (0..z.len())
                .map(|t| if t >= lag { z[t - lag] } else { f64::NAN })
                .collect();
            Column::new(format!("{name}_lag_{lag}"), values)
        })
        .collect())
}

/// Trailing mean and population standard deviation over `k` points ending
/// at `t` inclusive. Two-pass per window; windows here are short enough that
/// the O(n·k) cost is negligible and it avoids cancellation after level shifts.
pub fn rolling_moments(z: &[f64], k: usize) -> (Vec<f64>, Vec<f64>) {
    let n = z.len();
    let mut ma = vec![f64::NAN; n];
    let mut sd = vec![f64::NAN; n];
    if k == 0 || n < k {
        return (ma, sd);
    }
    let kf = k as f64;
    for t in k - 1..n {
        let w = &z[t + 1 - k..=t];
        let mean = w.iter().sum::<f64>() / kf;
        let m2 = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        ma[t] = mean;
        sd[t] = (m2 / kf).sqrt();
    }
    (ma, sd)
}

/// Moving average, population standard deviation and ε-stabilized
/// coefficient of variation for each window.
pub fn rolling_stats(
    name: &str,
    z: &[f64],
    windows: &[usize],
    eps: f64,
) -> Result<Vec<Column>, FeatureError> {
    let mut out = Vec::with_capacity(windows.len() * 3);
    for &k in windows {
        if k < 2 {
            return Err(FeatureError::InvalidParameter(format!(
                "{name}: rolling window must be at least 2, got {k}"
            )));
        }
        if k > z.len() {
            return Err(FeatureError::WindowExceedsSeries { window: k, len: z.len() });
        }
        let (ma, sd) = rolling_moments(z, k);
        let cv = ma.iter().zip(&sd).map(|(m, s)| s / (m + eps)).collect();
        out.push(Column::new(format!("{name}_ma_{k}"), ma));
        out.push(Column::new(format!("{name}_std_{k}"), sd));
        out.push(Column::new(format!("{name}_cv_{k}"), cv));
    }
    Ok(out)
}

/// Absolute change, plus the log change when `with_log` is set.
pub fn change_signals(name: &str, z: &[f64], with_log: bool) -> Result<Vec<Column>, FeatureError> {
    let n = z.len();
    let mut diff = vec![f64::NAN; n];
    for t in 1..n {
        diff[t] = z[t] - z[t - 1];
    }
    let mut out = vec![Column::new(format!("{name}_diff"), diff)];
    if with_log {
        if let Some(row) = z.iter().position(|&v| !(v > 0.0)) {
            return Err(FeatureError::NonPositiveForLog {
                column: name.into(),
                row,
            });
        }
        let mut logdiff = vec![f64::NAN; n];
        for t in 1..n {
            logdiff[t] = z[t].ln() - z[t - 1].ln();
        }
        out.push(Column::new(format!("{name}_logdiff"), logdiff));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceMetrics {
    /// Largest balance over the total.
    pub ratio: f64,
    /// Largest minus smallest balance.
    pub imbalance: f64,
    /// Set when every balance is zero; the ratio is then reported as 0.
    pub all_zero: bool,
}

pub fn balance_metrics(balances: &[f64]) -> BalanceMetrics {
    let total: f64 = balances.iter().sum();
    let max = balances.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = balances.iter().copied().fold(f64::INFINITY, f64::min);
    if balances.is_empty() || total <= 0.0 {
        return BalanceMetrics {
            ratio: 0.0,
            imbalance: if balances.is_empty() { 0.0 } else { max - min },
            all_zero: true,
        };
    }
    BalanceMetrics {
        ratio: max / total,
        imbalance: max - min,
        all_zero: false,
    }
}

/// Relative strength index from simple trailing means of the gains and
/// losses over the last `period` one-step changes.
///
/// A flat window is neutral (50); no gains with some losses gives 0.
pub fn rsi(z: &[f64], period: usize) -> Result<Vec<f64>, FeatureError> {
    if period == 0 || z.len() <= period {
        return Err(FeatureError::SeriesTooShort {
            needed: period + 1,
            got: z.len(),
        });
    }
    let mut out = vec![f64::NAN; z.len()];
    for t in period..z.len() {
        let (mut gain, mut loss) = (0.0, 0.0);
        for j in t + 1 - period..=t {
            let d = z[j] - z[j - 1];
            if d > 0.0 {
                gain += d;
            } else {
                loss -= d;
            }
        }
        let (gain, loss) = (gain / period as f64, loss / period as f64);
        out[t] = match (gain > 0.0, loss > 0.0) {
            (false, false) => 50.0,
            (false, true) => 0.0,
            (true, false) => 100.0,
            (true, true) => 100.0 / (1.0 + loss / gain),
        };
    }
    Ok(out)
}

/// Sine/cosine encodings of hour of day, day of week (Monday = 0) and
/// month (January = 0).
pub fn temporal_encodings(timestamps: &[DateTime<Utc>]) -> Vec<Column> {
    let mut cols: Vec<Column> = ["hour_sin", "hour_cos", "dow_sin", "dow_cos", "month_sin", "month_cos"]
        .iter()
        .map(|n| Column::new(*n, Vec::with_capacity(timestamps.len())))
        .collect();
    for ts in timestamps {
        let phases = [
            ts.hour() as f64 / 24.0,
            ts.weekday().num_days_from_monday() as f64 / 7.0,
            ts.month0() as f64 / 12.0,
        ];
        for (i, p) in phases.iter().enumerate() {
            let (s, c) = (TAU * p).sin_cos();
            cols[2 * i].values.push(s);
            cols[2 * i + 1].values.push(c);
        }
    }
    cols
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_timestamp;
    use proptest::prelude::*;

    fn naive_moments(z: &[f64], k: usize, t: usize) -> (f64, f64) {
        let w = &z[t + 1 - k..=t];
        let mean = w.iter().sum::<f64>() / k as f64;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k as f64;
        (mean, var.sqrt())
    }

    #[test]
    fn lag_shift() {
        let cols = lag_features("z", &[10.0, 20.0, 30.0], &[1]).unwrap();
        assert_eq!(cols[0].name, "z_lag_1");
        assert!(cols[0].values[0].is_nan());
        assert_eq!(&cols[0].values[1..], &[10.0, 20.0]);
        assert!(matches!(
            lag_features("z", &[1.0, 2.0], &[2]),
            Err(FeatureError::LagExceedsSeries { .. })
        ));
    }

    #[test]
    fn lag_of_constant_is_constant() {
        let z = vec![3.5; 50];
        for col in lag_features("z", &z, &[1, 4, 28]).unwrap() {
            assert!(col.values[28..].iter().all(|&v| v == 3.5));
        }
    }

    #[test]
    fn hour_horizons_map_to_grid_steps() {
        assert_eq!(hours_to_steps(&[1, 6, 24, 168], 6), vec![1, 4, 28]);
        assert_eq!(hours_to_steps(&[24, 168, 672], 6), vec![4, 28, 112]);
    }

    #[test]
    fn rolling_three_point_example() {
        let cols = rolling_stats("z", &[1.0, 3.0, 5.0], &[2], 1e-8).unwrap();
        assert_eq!(cols[0].values[2], 4.0);
        assert_eq!(cols[1].values[2], 1.0);
        assert_eq!(cols[2].values[2], 1.0 / (4.0 + 1e-8));
        assert!(cols[0].values[0].is_nan());
    }

    #[test]
    fn rolling_constant_has_zero_dispersion() {
        let z = vec![0.7; 300];
        for col in rolling_stats("z", &z, &[4, 28, 112], 1e-8).unwrap() {
            if col.name.contains("_std_") || col.name.contains("_cv_") {
                assert!(col.values.iter().filter(|v| !v.is_nan()).all(|v| v.abs() < 1e-12));
            }
        }
    }

    #[test]
    fn rolling_window_too_long() {
        assert!(matches!(
            rolling_stats("z", &[1.0; 3], &[4], 1e-8),
            Err(FeatureError::WindowExceedsSeries { .. })
        ));
    }

    #[test]
    fn changes() {
        let e = std::f64::consts::E;
        let cols = change_signals("z", &[2.0, 2.0 * e, 5.0 * e], true).unwrap();
        assert!((cols[1].values[1] - 1.0).abs() < 1e-15);
        let cols = change_signals("z", &[2.0, 5.0], false).unwrap();
        assert_eq!(cols[0].values[1], 3.0);
        let flat = change_signals("z", &[4.0; 5], true).unwrap();
        assert!(flat.iter().all(|c| c.values[1..].iter().all(|&v| v == 0.0)));
        assert_eq!(
            change_signals("z", &[1.0, 0.0], true).unwrap_err(),
            FeatureError::NonPositiveForLog {
                column: "z".into(),
                row: 1
            }
        );
    }

    #[test]
    fn balance_examples() {
        let m = balance_metrics(&[5.0, 5.0]);
        assert_eq!((m.ratio, m.imbalance), (0.5, 0.0));
        let m = balance_metrics(&[8.0, 2.0]);
        assert_eq!((m.ratio, m.imbalance), (0.8, 6.0));
        let m = balance_metrics(&[7.0]);
        assert_eq!((m.ratio, m.imbalance), (1.0, 0.0));
        let m = balance_metrics(&[0.0, 0.0]);
        assert!(m.all_zero);
        assert_eq!(m.ratio, 0.0);
    }

    #[test]
    fn rsi_conventions() {
        let up: Vec<f64> = (0..20).map(f64::from).collect();
        assert_eq!(rsi(&up, 14).unwrap()[19], 100.0);
        let down: Vec<f64> = (0..20).map(|i| -f64::from(i)).collect();
        assert_eq!(rsi(&down, 14).unwrap()[19], 0.0);
        // Alternating +1/-1 over 14 changes: equal mean gain and loss.
        let zig: Vec<f64> = (0..15).map(|i| f64::from(i % 2)).collect();
        assert_eq!(rsi(&zig, 14).unwrap()[14], 50.0);
        assert_eq!(rsi(&[1.0; 15], 14).unwrap()[14], 50.0);
        assert!(rsi(&[1.0; 14], 14).is_err());
    }

    #[test]
    fn temporal_examples() {
        let ts = [
            parse_timestamp("2024-07-22T00:00:00Z").unwrap(),
            parse_timestamp("2024-07-22T06:00:00Z").unwrap(),
        ];
        let cols = temporal_encodings(&ts);
        assert_eq!((cols[0].values[0], cols[1].values[0]), (0.0, 1.0));
        assert!((cols[0].values[1] - 1.0).abs() < 1e-15);
        assert!(cols[1].values[1].abs() < 1e-15);
        // 2024-07-22 is a Monday.
        assert_eq!(cols[2].values[0], 0.0);
        // July is month index 6.
        assert!((cols[4].values[0] - (TAU * 6.0 / 12.0).sin()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn rolling_matches_naive(z in prop::collection::vec(-50.0f64..50.0, 120..400), k in 2usize..60) {
            let (ma, sd) = rolling_moments(&z, k);
            for t in k - 1..z.len() {
                let (m, s) = naive_moments(&z, k, t);
                prop_assert!((ma[t] - m).abs() <= 1e-12, "ma t={} {} vs {}", t, ma[t], m);
                prop_assert!((sd[t] - s).abs() <= 1e-12, "sd t={} {} vs {}", t, sd[t], s);
            }
        }

        #[test]
        fn rsi_in_range(z in prop::collection::vec(-10.0f64..10.0, 16..80)) {
            for v in rsi(&z, 14).unwrap().into_iter().filter(|v| !v.is_nan()) {
                prop_assert!((0.0..=100.0).contains(&v));
            }
        }

        #[test]
        fn temporal_pairs_on_unit_circle(secs in 0i64..4_000_000_000) {
            let ts = [DateTime::<Utc>::from_timestamp(secs, 0).unwrap()];
            let cols = temporal_encodings(&ts);
            for pair in cols.chunks(2) {
                let r = pair[0].values[0].powi(2) + pair[1].values[0].powi(2);
                prop_assert!((r - 1.0).abs() < 1e-12);
            }
        }
    }
}
