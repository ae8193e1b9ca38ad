//! `poolbench` command-line entry point.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use poolbench_core::eval::read_pool_reports_csv;
use poolbench_core::ingest::ENDPOINT_ENV;
use poolbench_core::runner::{self, synth, RunConfig, AGGREGATE_MD_FILE, POOL_REPORTS_FILE};
use poolbench_core::ModelId;

#[derive(Parser, Debug)]
#[command(name = "poolbench", version, about = "Liquidity-pool forecasting benchmark")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Data directory (pool snapshot files).
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Comma-separated model ids, e.g. `xgboost,qnn`.
    #[arg(long, global = true, value_delimiter = ',')]
    models: Option<Vec<String>>,
    /// Comma-separated pool addresses.
    #[arg(long, global = true, value_delimiter = ',')]
    pools: Option<Vec<String>>,
    /// Parallel grid cells (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Download snapshot responses from the API into the data directory.
    Fetch {
        #[arg(long, env = ENDPOINT_ENV)]
        endpoint: Option<String>,
        /// Window start, RFC 3339.
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        to: Option<String>,
    },
    /// Write deterministic synthetic pool files.
    Synth {
        #[arg(long, default_value_t = 28)]
        n_pools: usize,
        #[arg(long, default_value_t = 1460)]
        rows: usize,
    },
    /// Train and evaluate the full model × pool grid.
    Run,
    /// Rebuild the aggregate table from a stored per-pool report.
    Report,
}

fn build_config(common: &Common) -> Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => RunConfig::default(),
    };
    if let Some(d) = &common.data {
        config.data.dir = d.clone();
    }
    if let Some(o) = &common.out {
        config.output.dir = o.clone();
    }
    if let Some(s) = common.seed {
        config.seed = s;
    }
    if let Some(models) = &common.models {
        config.models = models
            .iter()
            .map(|m| m.parse::<ModelId>())
            .collect::<Result<_, _>>()?;
    }
    if let Some(p) = &common.pools {
        config.pools = p.clone();
    }
    if let Some(w) = common.workers {
        config.workers = w;
    }
    config.validate()?;
    Ok(config)
}

fn report(dir: &Path) -> Result<()> {
    let path = dir.join(POOL_REPORTS_FILE);
    let file = std::fs::File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    let reports = read_pool_reports_csv(file)?;
    let (agg, ranking) = runner::summarize(&reports)?;
    runner::write_aggregate_outputs(dir, &agg, &ranking)?;
    print!("{}", std::fs::read_to_string(dir.join(AGGREGATE_MD_FILE))?);
    Ok(())
}

fn execute(cli: Cli) -> Result<ExitCode> {
    let config = build_config(&cli.common)?;
    match cli.command {
        Command::Synth { n_pools, rows } => {
            let files = synth::write_synthetic(&config.data.dir, n_pools, rows, config.seed)?;
            log::info!("wrote {} pool files to {}", files.len(), config.data.dir.display());
        }
        Command::Fetch { endpoint, from, to } => {
            let Some(endpoint) = endpoint.or(config.data.endpoint.clone()) else {
                bail!("no endpoint: pass --endpoint, set {ENDPOINT_ENV}, or set data.endpoint");
            };
            if config.pools.is_empty() {
                bail!("fetch needs --pools or a pools list in the config");
            }
            let from = from.or(config.data.from.clone()).context("fetch needs --from")?;
            let to = to.or(config.data.to.clone()).context("fetch needs --to")?;
            let files = runner::fetch_to_fixtures(&endpoint, &config.pools, &from, &to, &config.data.dir)?;
            log::info!("fetched {} pools into {}", files.len(), config.data.dir.display());
        }
        Command::Run => {
            let out = runner::run_benchmark(&config)?;
            print!("{}", std::fs::read_to_string(config.output.dir.join(AGGREGATE_MD_FILE))?);
            let m = &out.manifest;
            log::info!(
                "{} cells, {} failed, {:.1}s total",
                m.cells.len(),
                m.failed_cells,
                m.total_wall_clock_secs
            );
            if m.failed_cells > 0 {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Report => report(&config.output.dir)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
