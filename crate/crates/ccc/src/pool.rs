//! Training, saving and loading pools of prosocial and selfish pairs.

use std::fs;
use std::path::{Path, PathBuf};

use ccc_core::eval::{PoolMember, StrategyPool};
use ccc_core::pomg::{estimate_rate, Environment};
use ccc_core::rng::derive_path;
use ccc_core::training::{train_pair, Scheme, TrainedPair};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{read_checkpoint, RunDir};

/// One trained pair with its place in the pool.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolEntry {
    pub scheme: Scheme,
    pub index: usize,
    pub pair: TrainedPair,
}

fn scheme_stream(scheme: Scheme) -> u64 {
    match scheme {
        Scheme::Prosocial => 1,
        Scheme::Selfish => 2,
    }
}

/// Trains `cfg.train.pairs` pairs for each scheme, in parallel.
///
/// Pair `i` of a scheme always gets the same seed, whatever else is trained
/// alongside it.
pub fn train_pool<E: Environment>(env: &E, cfg: &RunConfig, schemes: &[Scheme]) -> CliResult<Vec<PoolEntry>> {
    let jobs: Vec<(Scheme, usize)> =
        schemes.iter().flat_map(|&s| (0..cfg.train.pairs).map(move |i| (s, i))).collect();
    jobs.par_iter()
        .map(|&(scheme, index)| {
            let seed = derive_path(cfg.seed, &[scheme_stream(scheme), index as u64]);
            let pair = train_pair(env, &cfg.train_config(scheme, seed))?;
            Ok(PoolEntry { scheme, index, pair })
        })
        .collect()
}

pub fn checkpoint_name(scheme: Scheme, index: usize, seat: usize) -> String {
    format!("checkpoints/{}-{index:02}-p{}.ckpt", scheme.label(), seat + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub scheme: String,
    pub pair: usize,
    pub batch: usize,
    pub rate_p1: f64,
    pub rate_p2: f64,
    pub joint_rate: f64,
}

/// Writes every checkpoint and one curve file for the whole pool.
pub fn save_pool(dir: &RunDir, entries: &[PoolEntry]) -> CliResult<()> {
    let mut rows = Vec::new();
    for e in entries {
        for (seat, params) in e.pair.params.iter().enumerate() {
            dir.write_checkpoint(&checkpoint_name(e.scheme, e.index, seat), params)?;
        }
        rows.extend(e.pair.curve.iter().map(|c| CurveRow {
            scheme: e.scheme.label().to_string(),
            pair: e.index,
            batch: c.batch,
            rate_p1: c.rates[0],
            rate_p2: c.rates[1],
            joint_rate: c.joint,
        }));
    }
    dir.write_csv("curves.csv", &rows)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub scheme: String,
    pub pair: usize,
    pub rate_p1: f64,
    pub rate_p2: f64,
    pub joint: f64,
    pub joint_se: f64,
}

/// Long-run rates of each trained pair playing itself.
pub fn evaluate_pool<E: Environment>(
    env: &E,
    entries: &[PoolEntry],
    episodes: usize,
    length: usize,
    seed: u64,
) -> CliResult<Vec<EvalRow>> {
    entries
        .par_iter()
        .map(|e| {
            let [p1, p2] = &e.pair.params;
            let eval_seed = derive_path(seed, &[3, scheme_stream(e.scheme), e.index as u64]);
            let r = estimate_rate(env, p1, p2, episodes, length, eval_seed)?;
            Ok(EvalRow {
                scheme: e.scheme.label().to_string(),
                pair: e.index,
                rate_p1: r[0].rate,
                rate_p2: r[1].rate,
                joint: r[0].rate + r[1].rate,
                joint_se: (r[0].std_error().powi(2) + r[1].std_error().powi(2)).sqrt(),
            })
        })
        .collect()
}

/// Pairs prosocial pair `i` with selfish pair `i`.
pub fn strategy_pool(entries: &[PoolEntry]) -> CliResult<StrategyPool> {
    let of = |scheme| {
        let mut v: Vec<&PoolEntry> = entries.iter().filter(|e| e.scheme == scheme).collect();
        v.sort_by_key(|e| e.index);
        v
    };
    let (coop, selfish) = (of(Scheme::Prosocial), of(Scheme::Selfish));
    if coop.is_empty() || coop.len() != selfish.len() {
        return Err(CliError::Usage(format!(
            "a strategy pool needs matching prosocial and selfish pairs (found {} and {})",
            coop.len(),
            selfish.len()
        )));
    }
    let members = coop
        .iter()
        .zip(&selfish)
        .map(|(c, s)| PoolMember { cooperative: c.pair.params.clone(), selfish: s.pair.params.clone() })
        .collect();
    Ok(StrategyPool::new(members)?)
}

/// Loads a pool written by `train`. `path` may be the run directory or its
/// `checkpoints` subdirectory.
pub fn load_pool(path: &Path) -> CliResult<StrategyPool> {
    let base = if path.join("checkpoints").is_dir() { path.to_path_buf() } else { path.join("..") };
    let listing = base.join("checkpoints");
    let names = fs::read_dir(&listing).map_err(|e| CliError::io(&listing, e))?;
    let mut indices = Vec::new();
    for entry in names {
        let entry = entry.map_err(|e| CliError::io(&listing, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(rest) = name.strip_prefix("prosocial-").and_then(|r| r.strip_suffix("-p1.ckpt")) {
            if let Ok(i) = rest.parse::<usize>() {
                indices.push(i);
            }
        }
    }
    indices.sort_unstable();
    if indices.is_empty() {
        return Err(CliError::Usage(format!("no prosocial checkpoints under {}", listing.display())));
    }
    let read = |scheme, i, seat| -> CliResult<_> {
        let file: PathBuf = base.join(checkpoint_name(scheme, i, seat));
        read_checkpoint(&file)
    };
    let members = indices
        .into_iter()
        .map(|i| {
            Ok(PoolMember {
                cooperative: [read(Scheme::Prosocial, i, 0)?, read(Scheme::Prosocial, i, 1)?],
                selfish: [read(Scheme::Selfish, i, 0)?, read(Scheme::Selfish, i, 1)?],
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(StrategyPool::new(members)?)
}
