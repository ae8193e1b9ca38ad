//! Small end-to-end grids on synthetic pools.

use std::path::Path;

use poolbench_core::deep::TransformerConfig;
use poolbench_core::error::Error;
use poolbench_core::eval::read_pool_reports_csv;
use poolbench_core::model::{fit_model, ModelsConfig, PoolData, TrainedModel};
use poolbench_core::runner::{self, synth, CellStatus, RunConfig, RunManifest};
use poolbench_core::ModelId;

fn fast_models() -> ModelsConfig {
    let mut c = ModelsConfig::default();
    c.random_forest.n_trees = 5;
    c.xgboost.n_rounds = 20;
    c.lstm.network.hidden = 4;
    c.lstm.training.max_epochs = 2;
    c.transformer.network = TransformerConfig {
        d_model: 8,
        heads: 2,
        blocks: 1,
        d_ff: 8,
        positional_encoding: true,
    };
    c.transformer.training.max_epochs = 2;
    c.qnn.max_epochs = 2;
    c.qsvm_qnn.max_support = 32;
    c
}

fn config(data: &Path, out: &Path, models: Vec<ModelId>) -> RunConfig {
    let mut c = RunConfig::default();
    c.data.dir = data.to_path_buf();
    c.output.dir = out.to_path_buf();
    c.models = models;
    c.params = fast_models();
    c.workers = 1;
    c
}

#[test]
fn two_by_two_grid_writes_reports_and_manifest() {
    let data = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    synth::write_synthetic(data.path(), 2, 200, 5).unwrap();
    let cfg = config(data.path(), out.path(), vec![ModelId::Xgboost, ModelId::Qnn]);
    let run = runner::run_benchmark(&cfg).unwrap();

    assert_eq!(run.reports.len(), 4);
    assert_eq!(run.manifest.failed_cells, 0);
    assert_eq!(run.ranking.order.len(), 2);

    let file = std::fs::File::open(out.path().join(runner::POOL_REPORTS_FILE)).unwrap();
    let stored = read_pool_reports_csv(file).unwrap();
    assert_eq!(stored.len(), 4);

    let manifest: RunManifest =
        serde_json::from_slice(&std::fs::read(out.path().join(runner::MANIFEST_FILE)).unwrap()).unwrap();
    assert_eq!(manifest.cells.len(), 4);
    assert_eq!(manifest.pools.len(), 2);
    assert_eq!(manifest.config, cfg);
    assert_eq!(manifest.feature_columns.len(), 73);
    for p in &manifest.pools {
        assert_eq!(p.raw_rows, 200);
        assert_eq!(p.train_rows + p.test_rows, p.feature_rows);
        assert_eq!(p.train_rows, (0.8 * p.feature_rows as f64).floor() as usize);
    }
    for f in [runner::AGGREGATE_CSV_FILE, runner::AGGREGATE_MD_FILE] {
        assert!(out.path().join(f).is_file(), "{f}");
    }
}

#[test]
fn every_model_in_a_pool_sees_the_same_features() {
    let data = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    synth::write_synthetic(data.path(), 2, 180, 8).unwrap();
    let cfg = config(data.path(), out.path(), ModelId::ALL.to_vec());
    let run = runner::run_benchmark(&cfg).unwrap();
    let m = &run.manifest;
    assert_eq!(m.cells.len(), 12);
    for pool in &m.pools {
        let hash = pool.feature_hash.as_ref().unwrap();
        for model in ModelId::ALL {
            assert_eq!(m.cell(&pool.pool_id, model).unwrap().input_hash.as_ref(), Some(hash));
        }
    }
    assert!(m.quantum_share >= 0.0 && m.quantum_share <= 1.0);
}

#[test]
fn a_failing_cell_leaves_the_others_untouched() {
    let data = tempfile::tempdir().unwrap();
    synth::write_synthetic(data.path(), 2, 200, 9).unwrap();
    let models = vec![ModelId::RandomForest, ModelId::Xgboost];

    let clean_out = tempfile::tempdir().unwrap();
    let clean_cfg = config(data.path(), clean_out.path(), models.clone());
    let (pools, rejected) = runner::load_pools(&clean_cfg).unwrap();
    let victim = pools[0].pool_id.clone();
    let clean = runner::run_benchmark(&clean_cfg).unwrap();

    let broken_out = tempfile::tempdir().unwrap();
    let broken_cfg = config(data.path(), broken_out.path(), models);
    let victim_id = victim.clone();
    let fit = move |id: ModelId, d: &PoolData, c: &ModelsConfig, seed: u64| -> Result<TrainedModel, Error> {
        if id == ModelId::Xgboost && d.pool_id() == victim_id {
            panic!("injected failure");
        }
        fit_model(id, d, c, seed)
    };
    let broken = runner::run_grid(&broken_cfg, pools, rejected, &fit).unwrap();

    assert_eq!(broken.manifest.failed_cells, 1);
    let cell = broken.manifest.cell(&victim, ModelId::Xgboost).unwrap();
    match &cell.status {
        CellStatus::Failed { error } => assert!(error.contains("injected failure"), "{error}"),
        CellStatus::Ok => panic!("cell should have failed"),
    }
    assert_eq!(broken.reports.len(), 3);
    for r in &broken.reports {
        let same = clean
            .reports
            .iter()
            .find(|c| c.pool_id == r.pool_id && c.model == r.model)
            .unwrap();
        assert_eq!(r, same);
    }
}

#[test]
fn pool_filter_and_unknown_pool() {
    let data = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    synth::write_synthetic(data.path(), 3, 150, 2).unwrap();
    let mut cfg = config(data.path(), out.path(), vec![ModelId::QsvmQnn]);
    let (all, _) = runner::load_pools(&cfg).unwrap();
    assert_eq!(all.len(), 3);

    cfg.pools = vec![all[1].pool_id.clone()];
    let run = runner::run_benchmark(&cfg).unwrap();
    assert_eq!(run.reports.len(), 1);
    assert_eq!(run.reports[0].pool_id, all[1].pool_id);

    cfg.pools = vec!["0xmissing".into()];
    assert!(matches!(runner::run_benchmark(&cfg), Err(Error::Config(_))));
}
