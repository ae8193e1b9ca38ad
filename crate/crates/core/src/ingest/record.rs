use chrono::{DateTime, NaiveDateTime, SubsecRound, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::RowErrorKind;

/// Required scalar columns, in input-schema order.
pub const REQUIRED_COLUMNS: [&str; 8] = [
    "timestamp",
    "pool_address",
    "pool_name",
    "source",
    "virtual_price",
    "volume_24h",
    "apy",
    "total_supply",
];

/// One pool snapshot at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub timestamp: DateTime<Utc>,
    pub pool_address: String,
    pub pool_name: String,
    pub source: String,
    pub virtual_price: f64,
    pub volume_24h: f64,
    /// Annualized yield in percent; may be negative.
    pub apy: f64,
    pub total_supply: f64,
    pub balances: Vec<f64>,
}

impl RawRecord {
    /// Checks the sign constraints of the input schema.
    pub fn validate(&self) -> Result<(), RowErrorKind> {
        if !(self.virtual_price > 0.0) {
            return Err(RowErrorKind::NegativeQuantity {
                field: "virtual_price".into(),
                value: self.virtual_price,
            });
        }
        let non_negative = [
            ("volume_24h", self.volume_24h),
            ("total_supply", self.total_supply),
        ];
        for (field, value) in non_negative {
            if !(value >= 0.0) {
                return Err(RowErrorKind::NegativeQuantity {
                    field: field.into(),
                    value,
                });
            }
        }
        if !self.apy.is_finite() {
            return Err(RowErrorKind::Malformed("apy is not finite".into()));
        }
        for (j, &b) in self.balances.iter().enumerate() {
            if !(b >= 0.0) || !b.is_finite() {
                return Err(RowErrorKind::NegativeQuantity {
                    field: format!("balance_{j}"),
                    value: b,
                });
            }
        }
        Ok(())
    }

    /// JSON object form used by the JSON-lines files and the snapshot API.
    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "timestamp": format_timestamp(&self.timestamp),
            "pool_address": self.pool_address,
            "pool_name": self.pool_name,
            "source": self.source,
            "virtual_price": self.virtual_price,
            "volume_24h": self.volume_24h,
            "apy": self.apy,
            "total_supply": self.total_supply,
            "balances": self.balances,
        })
    }

    /// Parses one JSON object, reporting the first missing or invalid field.
    pub fn from_json(obj: &Map<String, Value>) -> Result<Self, RowErrorKind> {
        let text = |key: &str| -> Result<String, RowErrorKind> {
            match obj.get(key) {
                Some(Value::String(s)) => Ok(s.clone()),
                Some(Value::Null) | None => Err(RowErrorKind::MissingColumn(key.into())),
                Some(other) => Ok(other.to_string()),
            }
        };
        let number = |key: &str| -> Result<f64, RowErrorKind> {
            match obj.get(key) {
                Some(Value::Number(n)) => n
                    .as_f64()
                    .ok_or_else(|| RowErrorKind::Malformed(format!("{key} is not a number"))),
                Some(Value::String(s)) => parse_number(key, s),
                Some(Value::Null) | None => Err(RowErrorKind::MissingColumn(key.into())),
                Some(_) => Err(RowErrorKind::Malformed(format!("{key} is not a number"))),
            }
        };
        let timestamp = parse_timestamp(&text("timestamp")?)?;
        let balances = match obj.get("balances") {
            Some(Value::Array(items)) => items
                .iter()
                .enumerate()
                .map(|(j, v)| {
                    v.as_f64().ok_or_else(|| {
                        RowErrorKind::Malformed(format!("balances[{j}] is not a number"))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?,
            Some(_) => return Err(RowErrorKind::Malformed("balances is not an array".into())),
            None => return Err(RowErrorKind::MissingColumn("balances".into())),
        };
        let record = RawRecord {
            timestamp,
            pool_address: text("pool_address")?,
            pool_name: text("pool_name")?,
            source: text("source")?,
            virtual_price: number("virtual_price")?,
            volume_24h: number("volume_24h")?,
            apy: number("apy")?,
            total_supply: number("total_supply")?,
            balances,
        };
        record.validate()?;
        Ok(record)
    }
}

pub(crate) fn parse_number(field: &str, raw: &str) -> Result<f64, RowErrorKind> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(RowErrorKind::MissingColumn(field.into()));
    }
    trimmed
        .parse::<f64>()
        .map_err(|_| RowErrorKind::Malformed(format!("{field}: cannot parse {trimmed:?}")))
}

/// Parses an ISO-8601 instant and truncates it to whole seconds in UTC.
///
/// Accepts RFC 3339 (`2024-07-20T18:00:00Z`, any offset) and the naive
/// `YYYY-MM-DD HH:MM:SS` / `YYYY-MM-DDTHH:MM:SS` forms, read as UTC.
pub fn parse_timestamp(raw: &str) -> Result<DateTime<Utc>, RowErrorKind> {
    let s = raw.trim();
    if s.is_empty() {
        return Err(RowErrorKind::MissingColumn("timestamp".into()));
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.with_timezone(&Utc).trunc_subsecs(0));
    }
    for fmt in ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(naive.and_utc().trunc_subsecs(0));
        }
    }
    Err(RowErrorKind::UnparseableTimestamp(s.into()))
}

pub fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}
