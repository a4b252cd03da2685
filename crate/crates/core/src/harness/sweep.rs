//! Cross-product sweeps and aggregation of their logs into a robustness table.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::analysis::AccuracyEntry;
use super::config::RunConfig;
use super::run::RunLog;
use crate::error::{Error, Result};

/// One completed run as listed in a sweep manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub strategy: String,
    pub problem: String,
    pub optimizer: String,
    pub seed: u64,
    pub path: PathBuf,
}

pub const MANIFEST_HEADER: &str = "strategy,problem,optimizer,seed,path";

/// Name of the problem column for a config: the problem kind and batch size.
pub fn problem_label(cfg: &RunConfig) -> String {
    format!("{}-b{}", cfg.problem, cfg.batch_size)
}

/// Every combination of `strategies x batch_sizes x seeds` over `base`, each
/// writing its log into `out_dir`.
pub fn sweep_configs(
    base: &RunConfig,
    strategies: &[String],
    batch_sizes: &[usize],
    seeds: &[u64],
    out_dir: &Path,
) -> Vec<RunConfig> {
    let mut out = Vec::with_capacity(strategies.len() * batch_sizes.len() * seeds.len());
    for s in strategies {
        for &b in batch_sizes {
            for &seed in seeds {
                let mut cfg = base.clone();
                cfg.strategy = s.clone();
                cfg.batch_size = b;
                cfg.seed = seed;
                cfg.output = Some(out_dir.join(format!("{s}-{}-b{b}-s{seed}.csv", base.direction)));
                out.push(cfg);
            }
        }
    }
    out
}

pub fn manifest_row(cfg: &RunConfig) -> ManifestRow {
    ManifestRow {
        strategy: cfg.strategy.clone(),
        problem: problem_label(cfg),
        optimizer: cfg.direction.to_string(),
        seed: cfg.seed,
        path: cfg.output.clone().unwrap_or_default(),
    }
}

pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<()> {
    let mut text = format!("{MANIFEST_HEADER}\n");
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            r.strategy,
            r.problem,
            r.optimizer,
            r.seed,
            r.path.display()
        ));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
        if rec.len() != 5 {
            return Err(Error::InvalidArgument(format!(
                "{}: expected 5 columns",
                path.display()
            )));
        }
        let run_path = PathBuf::from(&rec[4]);
        rows.push(ManifestRow {
            strategy: rec[0].to_string(),
            problem: rec[1].to_string(),
            optimizer: rec[2].to_string(),
            seed: rec[3]
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad seed `{}`", &rec[3])))?,
            path: if run_path.is_relative() && !run_path.exists() {
                base.join(run_path)
            } else {
                run_path
            },
        });
    }
    Ok(rows)
}

/// Final finite test accuracy of each run in percent, averaged over seeds.
pub fn accuracies_from_manifest(rows: &[ManifestRow]) -> Result<Vec<AccuracyEntry>> {
    let mut sums: BTreeMap<(String, String, String), (f64, u32)> = BTreeMap::new();
    let mut order = Vec::new();
    for r in rows {
        let log = RunLog::load(&r.path)?;
        let acc = log
            .last_finite_metrics()
            .and_then(|m| m.test_acc)
            .ok_or_else(|| Error::InvalidArgument(format!("{}: no finite test accuracy", r.path.display())))?;
        let k = (r.strategy.clone(), r.problem.clone(), r.optimizer.clone());
        if !sums.contains_key(&k) {
            order.push(k.clone());
        }
        let e = sums.entry(k).or_insert((0.0, 0));
        e.0 += 100.0 * acc;
        e.1 += 1;
    }
    Ok(order
        .into_iter()
        .map(|k| {
            let (sum, n) = sums[&k];
            AccuracyEntry::new(&k.0, &k.1, &k.2, sum / n as f64)
        })
        .collect())
}

/// Reads a `strategy,problem,optimizer,accuracy` table.
pub fn read_accuracy_table(path: &Path) -> Result<Vec<AccuracyEntry>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
        if rec.len() < 4 {
            return Err(Error::InvalidArgument(format!(
                "{}: expected 4 columns",
                path.display()
            )));
        }
        let acc = rec[3]
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad accuracy `{}`", &rec[3])))?;
        out.push(AccuracyEntry::new(rec[0].trim(), rec[1].trim(), rec[2].trim(), acc));
    }
    Ok(out)
}
