use chrono::{DateTime, Duration, Utc};

use super::{IngestError, RawRecord};

/// The fixed sampling cadence of every pool series.
pub const CADENCE_HOURS: i64 = 6;

pub fn cadence() -> Duration {
    Duration::hours(CADENCE_HOURS)
}

/// How missing grid slots are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GridMode {
    /// Any missing slot is an error. Used for benchmark runs.
    #[default]
    Strict,
    /// Missing slots are forward-filled from the previous record and listed
    /// in [`PoolSeries::filled`].
    Lenient,
}

/// One pool's records on a complete, strictly increasing 6-hour grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolSeries {
    pub pool_id: String,
    pub records: Vec<RawRecord>,
    pub cadence: Duration,
    /// Timestamps synthesized by forward-fill (lenient mode only).
    pub filled: Vec<DateTime<Utc>>,
    /// Number of input records dropped as same-timestamp duplicates.
    pub duplicates_collapsed: usize,
}

impl PoolSeries {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn timestamps(&self) -> Vec<DateTime<Utc>> {
        self.records.iter().map(|r| r.timestamp).collect()
    }

    pub fn column(&self, f: impl Fn(&RawRecord) -> f64) -> Vec<f64> {
        self.records.iter().map(f).collect()
    }
}

/// Sorts, de-duplicates (last read wins) and validates one pool's records.
pub fn build_series(records: Vec<RawRecord>, mode: GridMode) -> Result<PoolSeries, IngestError> {
    let first = records.first().ok_or(IngestError::EmptyInput)?;
    let pool_id = first.pool_address.clone();
    if let Some(other) = records.iter().find(|r| r.pool_address != pool_id) {
        return Err(IngestError::MixedPools {
            expected: pool_id,
            found: other.pool_address.clone(),
        });
    }
    let arity = first.balances.len();
    if let Some(bad) = records.iter().find(|r| r.balances.len() != arity) {
        return Err(IngestError::BalanceArity {
            timestamp: bad.timestamp,
            expected: arity,
            found: bad.balances.len(),
        });
    }

    let n_in = records.len();
    // Stable sort keeps read order among equal timestamps, so the last
    // element of each run is the last-read record.
    let mut sorted = records;
    sorted.sort_by_key(|r| r.timestamp);
    let mut deduped: Vec<RawRecord> = Vec::with_capacity(n_in);
    for r in sorted {
        match deduped.last_mut() {
            Some(prev) if prev.timestamp == r.timestamp => *prev = r,
            _ => deduped.push(r),
        }
    }
    let duplicates_collapsed = n_in - deduped.len();

    let step = cadence();
    let mut out: Vec<RawRecord> = Vec::with_capacity(deduped.len());
    let mut filled = Vec::new();
    for r in deduped {
        if let Some(prev) = out.last() {
            let gap = r.timestamp - prev.timestamp;
            if gap.num_seconds() % step.num_seconds() != 0 {
                return Err(IngestError::OffGrid(r.timestamp));
            }
            if gap > step {
                let missing = prev.timestamp + step;
                match mode {
                    GridMode::Strict => return Err(IngestError::GridGap(missing)),
                    GridMode::Lenient => {
                        let mut t = missing;
                        let template = prev.clone();
                        while t < r.timestamp {
                            let mut fill = template.clone();
                            fill.timestamp = t;
                            out.push(fill);
                            filled.push(t);
                            t += step;
                        }
                    }
                }
            }
        }
        out.push(r);
    }

    Ok(PoolSeries {
        pool_id,
        records: out,
        cadence: step,
        filled,
        duplicates_collapsed,
    })
}
