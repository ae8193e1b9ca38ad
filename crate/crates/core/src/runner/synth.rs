//! Deterministic synthetic pool snapshots on the 6-hour grid.
//!
//! Virtual price is an Ornstein-Uhlenbeck process around 1.0 plus weekly
//! and daily seasonal terms, so calendar features carry real signal.
//! Volume, yield and supply share the weekly cycle; each pool holds two or
//! three coins whose weights drift slowly.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use chrono::{DateTime, TimeZone, Utc};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::ingest::{build_series, cadence, write_csv, GridMode, PoolSeries, RawRecord};
use crate::seed;

/// Steps per day and per week on the 6-hour grid.
const DAY: f64 = 4.0;
const WEEK: f64 = 28.0;

pub fn synth_start() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 7, 20, 18, 0, 0).unwrap()
}

/// Rows needed for at least one usable feature row under default features.
pub fn min_rows() -> usize {
    FeatureConfig::default().min_series_len()
}

fn check_rows(rows: usize) -> Result<()> {
    let min = min_rows();
    if rows < min {
        return Err(Error::Config(format!("synthetic pools need at least {min} rows, got {rows}")));
    }
    Ok(())
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Records for pool number `index` of a generator seeded with `seed`.
pub fn generate_records(seed: u64, index: usize, rows: usize) -> Vec<RawRecord> {
    let mut rng = seed::rng(seed::derive_label(seed, &format!("synth/pool/{index}")));
    let address = format!("0x{}", hex::encode(rng.random::<[u8; 20]>()));
    let n_coins = rng.random_range(2..=3usize);

    let kappa = rng.random_range(0.02..0.08);
    let sigma = rng.random_range(0.0005..0.0012);
    let amp_week = rng.random_range(0.002..0.006);
    let amp_day = rng.random_range(0.0015..0.003);
    let (ph_week, ph_day) = (rng.random_range(0.0..TAU), rng.random_range(0.0..TAU));

    let vol_base = 10f64.powf(rng.random_range(5.0..7.0));
    let apy_base = rng.random_range(1.0..8.0);
    let mut supply = 10f64.powf(rng.random_range(6.0..8.0));
    let mut logits: Vec<f64> = (0..n_coins).map(|_| rng.random_range(-0.3..0.3)).collect();

    let mut ou = 0.0;
    let mut out = Vec::with_capacity(rows);
    for t in 0..rows {
        let tf = t as f64;
        let week = (TAU * tf / WEEK + ph_week).sin();
        let day = (TAU * tf / DAY + ph_day).sin();
        let virtual_price = 1.0 + ou + amp_week * week + amp_day * day;

        let volume_24h = vol_base * (0.3 * week + 0.2 * day + 0.25 * normal(&mut rng)).exp();
        let apy = apy_base + 0.5 * week + 0.3 * normal(&mut rng);
        let total = logits.iter().map(|l| l.exp()).sum::<f64>();
        let balances = logits.iter().map(|l| supply * virtual_price * l.exp() / total).collect();

        out.push(RawRecord {
            timestamp: synth_start() + cadence() * t as i32,
            pool_address: address.clone(),
            pool_name: format!("synthetic-{index:02}"),
            source: "synthetic".into(),
            virtual_price,
            volume_24h,
            apy,
            total_supply: supply,
            balances,
        });

        ou += -kappa * ou + sigma * normal(&mut rng);
        supply *= (0.002 * normal(&mut rng) + 0.0005 * week).exp();
        for l in &mut logits {
            *l += 0.01 * normal(&mut rng);
        }
    }
    out
}

/// One synthetic pool as a validated series.
pub fn generate_pool(seed: u64, index: usize, rows: usize) -> Result<PoolSeries> {
    check_rows(rows)?;
    Ok(build_series(generate_records(seed, index, rows), GridMode::Strict)?)
}

pub fn generate_synthetic(pools: usize, rows: usize, seed: u64) -> Result<Vec<Vec<RawRecord>>> {
    check_rows(rows)?;
    Ok((0..pools).map(|i| generate_records(seed, i, rows)).collect())
}

/// Writes one `pool_NN.csv` per pool into `dir`.
pub fn write_synthetic(dir: impl AsRef<Path>, pools: usize, rows: usize, seed: u64) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    generate_synthetic(pools, rows, seed)?
        .iter()
        .enumerate()
        .map(|(i, records)| {
            let path = dir.join(format!("pool_{i:02}.csv"));
            let mut buf = Vec::new();
            write_csv(&mut buf, records)?;
            std::fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::load_dir;

    #[test]
    fn minimum_rows() {
        assert_eq!(min_rows(), 117);
        assert!(generate_synthetic(1, 116, 1).is_err());
        assert!(generate_pool(1, 0, 117).is_ok());
    }

    #[test]
    fn files_are_grid_complete_and_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let pa = write_synthetic(a.path(), 3, 200, 42).unwrap();
        let pb = write_synthetic(b.path(), 3, 200, 42).unwrap();
        for (x, y) in pa.iter().zip(&pb) {
            assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
        }
        let loaded = load_dir(a.path()).unwrap();
        assert!(loaded.errors.is_empty());
        assert_eq!(loaded.pools.len(), 3);
        for records in loaded.pools.into_values() {
            let s = build_series(records, GridMode::Strict).unwrap();
            assert_eq!(s.len(), 200);
            assert_eq!(s.records[0].timestamp, synth_start());
            assert!((2..=3).contains(&s.records[0].balances.len()));
        }
    }

    #[test]
    fn seeds_and_indices_differ() {
        let a = generate_records(1, 0, 150);
        assert_ne!(a, generate_records(2, 0, 150));
        assert_ne!(a[0].pool_address, generate_records(1, 1, 150)[0].pool_address);
    }

    #[test]
    fn price_stays_near_one() {
        for i in 0..5 {
            let r = generate_records(42, i, 1460);
            assert!(r.iter().all(|x| (x.virtual_price - 1.0).abs() < 0.1 && x.total_supply > 0.0));
        }
    }
}
