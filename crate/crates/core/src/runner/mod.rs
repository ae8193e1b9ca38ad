//! End-to-end benchmark runs: load pools, build features, train every
//! (pool, model) cell, evaluate, and write reports plus a manifest.

mod config;
pub mod synth;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{DataConfig, OutputConfig, RunConfig};

use crate::error::{Error, Result};
use crate::eval::{
    aggregate, evaluate, rank, render_markdown, write_aggregate_csv, write_pool_reports_csv, AggregateReport, EvalError,
    ModelId, PoolReport, Ranking, Split,
};
use crate::features::assemble_matrix;
use crate::ingest::{build_series, load_dir, parse_timestamp, GridMode, PoolSeries, SnapshotClient};
use crate::model::{cell_seed, fit_model, ModelsConfig, PoolData, TrainedModel};

pub const POOL_REPORTS_FILE: &str = "pool_reports.csv";
pub const AGGREGATE_CSV_FILE: &str = "aggregate.csv";
pub const AGGREGATE_MD_FILE: &str = "aggregate.md";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Signature of the per-cell training step; [`fit_model`] in normal runs.
pub type FitFn = dyn Fn(ModelId, &PoolData, &ModelsConfig, u64) -> Result<TrainedModel> + Sync;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub pool_id: String,
    pub model: ModelId,
    #[serde(flatten)]
    pub status: CellStatus,
    pub wall_clock_secs: f64,
    /// Hash of the feature matrix this cell trained and scored on.
    pub input_hash: Option<String>,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolRecord {
    pub pool_id: String,
    pub raw_rows: usize,
    pub warmup_dropped: usize,
    pub horizon_dropped: usize,
    pub feature_rows: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub zero_balance_rows: usize,
    pub feature_hash: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software_version: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub feature_columns: Vec<String>,
    pub rejected_rows: usize,
    pub pools: Vec<PoolRecord>,
    pub cells: Vec<CellRecord>,
    /// Summed cell wall-clock per model.
    pub model_wall_clock_secs: BTreeMap<ModelId, f64>,
    /// Share of summed cell time spent in the circuit models.
    pub quantum_share: f64,
    pub total_wall_clock_secs: f64,
    pub failed_cells: usize,
}

impl RunManifest {
    pub fn cell(&self, pool_id: &str, model: ModelId) -> Option<&CellRecord> {
        self.cells.iter().find(|c| c.pool_id == pool_id && c.model == model)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub reports: Vec<PoolReport>,
    pub aggregate: AggregateReport,
    pub ranking: Ranking,
    pub manifest: RunManifest,
}

/// Reads every pool in the configured data directory. Row-level rejects
/// are counted, not fatal.
pub fn load_pools(config: &RunConfig) -> Result<(Vec<PoolSeries>, usize)> {
    let outcome = load_dir(&config.data.dir)?;
    for e in &outcome.errors {
        log::warn!("rejected row: {e}");
    }
    let rejected = outcome.errors.len();
    let mut pools = Vec::new();
    for (id, records) in outcome.pools {
        if !config.pools.is_empty() && !config.pools.contains(&id) {
            continue;
        }
        pools.push(build_series(records, GridMode::Strict)?);
    }
    if let Some(missing) = config.pools.iter().find(|p| !pools.iter().any(|s| &s.pool_id == *p)) {
        return Err(Error::Config(format!("pool {missing} not found in {}", config.data.dir.display())));
    }
    Ok((pools, rejected))
}

pub fn run_benchmark(config: &RunConfig) -> Result<RunOutput> {
    let (pools, rejected) = load_pools(config)?;
    run_grid(config, pools, rejected, &fit_model)
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".into())
}

fn pool_record(series: &PoolSeries, data: &std::result::Result<PoolData, String>) -> PoolRecord {
    match data {
        Ok(d) => PoolRecord {
            pool_id: series.pool_id.clone(),
            raw_rows: series.len(),
            warmup_dropped: d.matrix.warmup_dropped,
            horizon_dropped: d.matrix.horizon_dropped,
            feature_rows: d.matrix.n_rows(),
            train_rows: d.split.train().len(),
            test_rows: d.split.test_len(),
            zero_balance_rows: d.matrix.zero_balance_rows,
            feature_hash: Some(d.content_hash()),
            error: None,
        },
        Err(e) => PoolRecord {
            pool_id: series.pool_id.clone(),
            raw_rows: series.len(),
            warmup_dropped: 0,
            horizon_dropped: 0,
            feature_rows: 0,
            train_rows: 0,
            test_rows: 0,
            zero_balance_rows: 0,
            feature_hash: None,
            error: Some(e.clone()),
        },
    }
}

fn run_cell(config: &RunConfig, data: &PoolData, model: ModelId, fit: &FitFn) -> Result<(PoolReport, Vec<String>)> {
    let pool = data.pool_id();
    let trained = fit(model, data, &config.params, cell_seed(config.seed, pool, model))?;
    let train = trained.predict(data, Split::Train)?;
    let test = trained.predict(data, Split::Test)?;
    let report = evaluate(pool, model, (data.y(Split::Train), &train), (data.y(Split::Test), &test))?;
    let dir = config.output.dir.join("artifacts").join(pool).join(model.slug());
    let artifacts = trained.write_artifacts(&dir, data, &config.params, config.output.save_models, config.output.save_forest)?;
    Ok((report, artifacts))
}

/// Trains and scores every (pool, model) cell and writes all outputs into
/// `config.output.dir`. A failing or panicking cell is recorded and skipped.
pub fn run_grid(config: &RunConfig, pools: Vec<PoolSeries>, rejected_rows: usize, fit: &FitFn) -> Result<RunOutput> {
    config.validate()?;
    let started = Instant::now();
    let out = &config.output.dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let prepared: Vec<std::result::Result<PoolData, String>> = pools
        .iter()
        .map(|s| {
            assemble_matrix(s, &config.features)
                .map_err(Error::from)
                .and_then(|m| PoolData::prepare(&m, config.split_ratio))
                .map_err(|e| e.to_string())
        })
        .collect();
    let pool_records: Vec<PoolRecord> = pools.iter().zip(&prepared).map(|(s, d)| pool_record(s, d)).collect();
    let feature_columns = prepared
        .iter()
        .find_map(|d| d.as_ref().ok())
        .map(|d| d.matrix.columns.clone())
        .unwrap_or_default();

    let cells: Vec<(usize, ModelId)> = (0..pools.len())
        .flat_map(|p| config.models.iter().map(move |&m| (p, m)))
        .collect();
    let workers = rayon::ThreadPoolBuilder::new()
        .num_threads(config.worker_count())
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let results: Vec<(CellRecord, Option<PoolReport>)> = workers.install(|| {
        cells
            .par_iter()
            .map(|&(p, model)| {
                let pool_id = pools[p].pool_id.clone();
                let t0 = Instant::now();
                let (outcome, input_hash) = match &prepared[p] {
                    Err(e) => (Err(format!("feature construction failed: {e}")), None),
                    Ok(data) => {
                        let r = catch_unwind(AssertUnwindSafe(|| run_cell(config, data, model, fit)));
                        let r = match r {
                            Ok(Ok(v)) => Ok(v),
                            Ok(Err(e)) => Err(e.to_string()),
                            Err(payload) => Err(format!("panicked: {}", panic_message(payload))),
                        };
                        (r, Some(data.content_hash()))
                    }
                };
                let secs = t0.elapsed().as_secs_f64();
                match outcome {
                    Ok((report, artifacts)) => {
                        log::info!("{pool_id} {model}: test DA {:.4} ({secs:.1}s)", report.test.da);
                        let rec = CellRecord {
                            pool_id,
                            model,
                            status: CellStatus::Ok,
                            wall_clock_secs: secs,
                            input_hash,
                            artifacts,
                        };
                        (rec, Some(report))
                    }
                    Err(error) => {
                        log::error!("{pool_id} {model}: {error}");
                        let rec = CellRecord {
                            pool_id,
                            model,
                            status: CellStatus::Failed { error },
                            wall_clock_secs: secs,
                            input_hash,
                            artifacts: Vec::new(),
                        };
                        (rec, None)
                    }
                }
            })
            .collect()
    });

    let (cell_records, reports): (Vec<CellRecord>, Vec<Option<PoolReport>>) = results.into_iter().unzip();
    let reports: Vec<PoolReport> = reports.into_iter().flatten().collect();
    let (agg, ranking) = summarize(&reports)?;
    write_reports(out, &reports, &agg, &ranking)?;

    let mut model_wall_clock_secs: BTreeMap<ModelId, f64> = BTreeMap::new();
    for c in &cell_records {
        *model_wall_clock_secs.entry(c.model).or_default() += c.wall_clock_secs;
    }
    let cell_total: f64 = model_wall_clock_secs.values().sum();
    let quantum: f64 = model_wall_clock_secs.iter().filter(|(m, _)| m.is_quantum()).map(|(_, s)| s).sum();
    let failed_cells = cell_records.iter().filter(|c| c.status != CellStatus::Ok).count();
    let manifest = RunManifest {
        software_version: env!("CARGO_PKG_VERSION").into(),
        config_hash: config.hash(),
        config: config.clone(),
        feature_columns,
        rejected_rows,
        pools: pool_records,
        cells: cell_records,
        model_wall_clock_secs,
        quantum_share: if cell_total > 0.0 { quantum / cell_total } else { 0.0 },
        total_wall_clock_secs: started.elapsed().as_secs_f64(),
        failed_cells,
    };
    let path = out.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Serde(e.to_string()))?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;

    Ok(RunOutput {
        reports,
        aggregate: agg,
        ranking,
        manifest,
    })
}

/// Aggregate and ranking; both empty when no cell succeeded.
pub fn summarize(reports: &[PoolReport]) -> Result<(AggregateReport, Ranking)> {
    let agg = match aggregate(reports) {
        Ok(a) => a,
        Err(EvalError::NoReports) => AggregateReport { models: Vec::new() },
        Err(e) => return Err(e.into()),
    };
    let ranking = rank(&agg);
    Ok((agg, ranking))
}

fn write_file(path: PathBuf, bytes: Vec<u8>) -> Result<()> {
    std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
}

/// Writes the per-pool CSV, the aggregate CSV and the Markdown table.
pub fn write_reports(dir: &Path, reports: &[PoolReport], agg: &AggregateReport, ranking: &Ranking) -> Result<()> {
    let mut buf = Vec::new();
    write_pool_reports_csv(reports, &mut buf)?;
    if reports.is_empty() {
        buf = b"pool,model,split,mae,rmse,da\n".to_vec();
    }
    write_file(dir.join(POOL_REPORTS_FILE), buf)?;
    write_aggregate_outputs(dir, agg, ranking)
}

pub fn write_aggregate_outputs(dir: &Path, agg: &AggregateReport, ranking: &Ranking) -> Result<()> {
    let mut buf = Vec::new();
    write_aggregate_csv(agg, ranking, &mut buf)?;
    write_file(dir.join(AGGREGATE_CSV_FILE), buf)?;
    write_file(dir.join(AGGREGATE_MD_FILE), render_markdown(agg, ranking).into_bytes())
}

/// Downloads raw snapshot responses into `dir` as `{pool}.json`, the layout
/// the fixture mode of [`SnapshotClient`] replays.
pub fn fetch_to_fixtures(endpoint: &str, pools: &[String], from: &str, to: &str, dir: &Path) -> Result<Vec<PathBuf>> {
    let parse = |s: &str| -> Result<DateTime<Utc>> {
        parse_timestamp(s).map_err(|e| Error::Config(format!("bad fetch window bound {s:?}: {e}")))
    };
    let (from, to) = (parse(from)?, parse(to)?);
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let client = SnapshotClient::live(endpoint);
    pools
        .iter()
        .map(|pool| {
            let body = client.fetch_raw(pool, from, to)?;
            // Reject drifted payloads before they land in the data directory.
            crate::ingest::parse_response(&body)?;
            let path = SnapshotClient::fixture_path(dir, pool);
            write_file(path.clone(), body)?;
            Ok(path)
        })
        .collect()
}
