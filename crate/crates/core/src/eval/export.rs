//! CSV and Markdown exports. CSVs keep full precision; the Markdown table
//! rounds to two decimals and prints direction accuracy as a percentage.

use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{AggregateReport, EvalError, MetricSet, ModelId, PoolReport, Ranking, Split};

#[derive(Debug, Serialize, Deserialize)]
struct PoolRow {
    pool: String,
    model: String,
    split: String,
    mae: f64,
    rmse: f64,
    da: f64,
}

fn csv_err(e: csv::Error) -> EvalError {
    EvalError::Parse(e.to_string())
}

/// One line per (pool, model, split).
pub fn write_pool_reports_csv<W: Write>(reports: &[PoolReport], writer: W) -> Result<(), EvalError> {
    let mut wtr = csv::Writer::from_writer(writer);
    for r in reports {
        for split in [Split::Train, Split::Test] {
            let m = r.split(split);
            wtr.serialize(PoolRow {
                pool: r.pool_id.clone(),
                model: r.model.slug().into(),
                split: split.as_str().into(),
                mae: m.mae,
                rmse: m.rmse,
                da: m.da,
            })
            .map_err(csv_err)?;
        }
    }
    wtr.flush().map_err(|e| EvalError::Parse(e.to_string()))
}

/// Inverse of [`write_pool_reports_csv`]. Every (pool, model) needs both splits.
pub fn read_pool_reports_csv<R: Read>(reader: R) -> Result<Vec<PoolReport>, EvalError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut partial: Vec<(String, ModelId, Option<MetricSet>, Option<MetricSet>)> = Vec::new();
    for row in rdr.deserialize::<PoolRow>() {
        let row = row.map_err(csv_err)?;
        let model: ModelId = row.model.parse()?;
        let m = MetricSet {
            mae: row.mae,
            rmse: row.rmse,
            da: row.da,
        };
        let idx = match partial.iter().position(|p| p.0 == row.pool && p.1 == model) {
            Some(i) => i,
            None => {
                partial.push((row.pool.clone(), model, None, None));
                partial.len() - 1
            }
        };
        let slot = match row.split.as_str() {
            "train" => &mut partial[idx].2,
            "test" => &mut partial[idx].3,
            other => return Err(EvalError::Parse(format!("unknown split `{other}`"))),
        };
        if slot.replace(m).is_some() {
            return Err(EvalError::Parse(format!("duplicate {} row for {}/{}", row.split, row.pool, model)));
        }
    }
    partial
        .into_iter()
        .map(|(pool_id, model, train, test)| match (train, test) {
            (Some(train), Some(test)) => Ok(PoolReport {
                pool_id,
                model,
                train,
                test,
            }),
            _ => Err(EvalError::Parse(format!("{pool_id}/{model} is missing a split"))),
        })
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Long format: rank, model, split, metric, pools, mean, std (blank when undefined).
pub fn write_aggregate_csv<W: Write>(agg: &AggregateReport, ranking: &Ranking, writer: W) -> Result<(), EvalError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["rank", "model", "split", "metric", "pools", "mean", "std"]).map_err(csv_err)?;
    for (i, &model) in ranking.order.iter().enumerate() {
        let Some(m) = agg.get(model) else { continue };
        for split in [Split::Test, Split::Train] {
            let s = m.split(split);
            for (name, stat) in [("mae", s.mae), ("rmse", s.rmse), ("da", s.da)] {
                wtr.write_record([
                    (i + 1).to_string(),
                    model.slug().to_string(),
                    split.as_str().to_string(),
                    name.to_string(),
                    m.pools.to_string(),
                    stat.mean.to_string(),
                    fmt_opt(stat.std),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    wtr.flush().map_err(|e| EvalError::Parse(e.to_string()))
}

const HEADER: [&str; 7] = ["Model", "Test MAE", "Test RMSE", "Dir. Acc.", "Train MAE", "Train RMSE", "Train Acc."];

/// Rows in ranking order with two-decimal values.
pub fn render_markdown(agg: &AggregateReport, ranking: &Ranking) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "| {} |", HEADER.join(" | "));
    let _ = writeln!(out, "|---|{}", "---:|".repeat(HEADER.len() - 1));
    for &model in &ranking.order {
        let Some(m) = agg.get(model) else { continue };
        let (te, tr) = (m.test.means(), m.train.means());
        let _ = writeln!(
            out,
            "| {} | {:.2} | {:.2} | {:.2}% | {:.2} | {:.2} | {:.2}% |",
            model.display_name(),
            te.mae,
            te.rmse,
            te.da * 100.0,
            tr.mae,
            tr.rmse,
            tr.da * 100.0
        );
    }
    out
}

/// Splits a Markdown table into (model name, six cell strings) rows.
pub fn parse_markdown_table(text: &str) -> Result<Vec<(String, Vec<String>)>, EvalError> {
    let mut lines = text.lines().map(str::trim).filter(|l| l.starts_with('|'));
    let cells = |l: &str| -> Vec<String> { l.trim_matches('|').split('|').map(|c| c.trim().to_string()).collect() };
    let header = lines.next().ok_or_else(|| EvalError::Parse("missing header".into()))?;
    if cells(header) != HEADER {
        return Err(EvalError::Parse(format!("unexpected header `{header}`")));
    }
    lines.next();
    lines
        .map(|l| {
            let mut c = cells(l);
            if c.len() != HEADER.len() {
                return Err(EvalError::Parse(format!("expected {} cells in `{l}`", HEADER.len())));
            }
            let name = c.remove(0);
            Ok((name, c))
        })
        .collect()
}
