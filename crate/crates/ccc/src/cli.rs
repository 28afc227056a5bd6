//! Argument parsing and dispatch.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use ccc_core::eval::PropertyStatus;
use ccc_core::training::Scheme;
use clap::{Args, Parser, Subcommand};

use crate::commands;
use crate::config::{EnvKind, RunConfig};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "ccc", version, about = "Conditional cooperation in sequential social dilemmas")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Parent directory for run directories.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct EnvArg {
    /// matrix_pd, risky_pd, fishery or coins.
    #[arg(long, value_parser = parse_env)]
    pub env: Option<EnvKind>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train prosocial and/or selfish policy pairs.
    Train {
        #[command(flatten)]
        env: EnvArg,
        /// prosocial or selfish; both when omitted.
        #[arg(long, value_parser = parse_scheme)]
        scheme: Option<Scheme>,
        #[arg(long)]
        pairs: Option<usize>,
        #[arg(long)]
        batches: Option<usize>,
    },
    /// Precompute the CCC threshold schedule for a policy pair.
    Thresholds {
        #[command(flatten)]
        env: EnvArg,
        #[arg(long)]
        pi_c: PathBuf,
        #[arg(long)]
        pi_d: PathBuf,
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Play repeated games between two strategies.
    Match {
        #[command(flatten)]
        env: EnvArg,
        #[arg(long)]
        p1: Option<String>,
        #[arg(long)]
        p2: Option<String>,
        #[arg(long)]
        games: Option<usize>,
        #[arg(long)]
        length: Option<usize>,
        /// Run directory written by `train`.
        #[arg(long)]
        pool: Option<PathBuf>,
    },
    /// Round robin with SelfMatch, Safety and IncentC metrics.
    Tournament {
        #[command(flatten)]
        env: EnvArg,
        /// Comma-separated strategy names.
        #[arg(long, value_delimiter = ',')]
        strategies: Option<Vec<String>>,
        #[arg(long)]
        games_per_cell: Option<usize>,
        #[arg(long)]
        length: Option<usize>,
        #[arg(long)]
        pool: Option<PathBuf>,
    },
    /// Check the long-run guarantees of CCC on a matrix game.
    VerifyTheorem {
        #[command(flatten)]
        env: EnvArg,
        #[arg(long)]
        pi_c: Option<PathBuf>,
        #[arg(long)]
        pi_d: Option<PathBuf>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        seeds: Option<usize>,
    },
}

fn parse_env(s: &str) -> Result<EnvKind, String> {
    s.parse()
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: ccc_core::Error| e.to_string())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Builds the effective config: file, then global flags, then command flags.
pub fn effective_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    let env = match &cli.command {
        Command::Train { env, .. }
        | Command::Thresholds { env, .. }
        | Command::Match { env, .. }
        | Command::Tournament { env, .. }
        | Command::VerifyTheorem { env, .. } => env.env,
    };
    if let Some(kind) = env {
        cfg.env.kind = kind;
    }
    match &cli.command {
        Command::Train { scheme, pairs, batches, .. } => {
            if scheme.is_some() {
                cfg.train.scheme = *scheme;
            }
            set(&mut cfg.train.pairs, *pairs);
            set(&mut cfg.train.batches, *batches);
        }
        Command::Thresholds { horizon, .. } => set(&mut cfg.ccc.horizon, *horizon),
        Command::Match { p1, p2, games, length, pool, .. } => {
            set(&mut cfg.matchup.p1, p1.clone());
            set(&mut cfg.matchup.p2, p2.clone());
            set(&mut cfg.matchup.games, *games);
            set(&mut cfg.matchup.length, *length);
            if pool.is_some() {
                cfg.tournament.pool = pool.clone();
            }
        }
        Command::Tournament { strategies, games_per_cell, length, pool, .. } => {
            if strategies.is_some() {
                cfg.tournament.strategies = strategies.clone();
            }
            set(&mut cfg.tournament.games_per_cell, *games_per_cell);
            set(&mut cfg.tournament.length, *length);
            if pool.is_some() {
                cfg.tournament.pool = pool.clone();
            }
        }
        Command::VerifyTheorem { horizon, seeds, .. } => {
            set(&mut cfg.theorem.horizon, *horizon);
            set(&mut cfg.theorem.seeds, *seeds);
        }
    }
    let cfg = cfg.resolve();
    cfg.validate()?;
    Ok(cfg)
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn execute(cli: Cli) -> CliResult<i32> {
    let cfg = effective_config(&cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} threads: {e}", cfg.threads)))?;
    pool.install(|| dispatch(&cli.command, &cfg))
}

fn dispatch(command: &Command, cfg: &RunConfig) -> CliResult<i32> {
    let mut out = std::io::stdout().lock();
    let mut say = |line: String| {
        let _ = writeln!(out, "{line}");
    };
    match command {
        Command::Train { .. } => {
            let done = commands::train(cfg)?;
            for row in &done.evaluation {
                say(format!("{} pair {}: joint rate {:.4} ± {:.4}", row.scheme, row.pair, row.joint, row.joint_se));
            }
            say(format!("wrote {}", done.dir.display()));
            Ok(0)
        }
        Command::Thresholds { pi_c, pi_d, .. } => {
            let (dir, rows) = commands::thresholds(cfg, pi_c, pi_d)?;
            if let Some(last) = rows.last() {
                say(format!("threshold at turn {}: {:.4}", last.turn, last.threshold));
            }
            say(format!("wrote {}", dir.display()));
            Ok(0)
        }
        Command::Match { .. } => {
            let (dir, r) = commands::matchup(cfg)?;
            say(format!("{}: {:.2} ± {:.2}", r.p1, r.s1.mean, r.s1.std_error));
            say(format!("{}: {:.2} ± {:.2}", r.p2, r.s2.mean, r.s2.std_error));
            say(format!("wrote {}", dir.display()));
            Ok(0)
        }
        Command::Tournament { .. } => {
            let (dir, report) = commands::tournament(cfg)?;
            say(format!("{:<8} {:>12} {:>12} {:>12}", "strategy", "SelfMatch", "Safety", "IncentC"));
            for m in &report.metrics {
                say(format!(
                    "{:<8} {:>12.2} {:>12.2} {:>12.2}",
                    m.strategy, m.self_match.value, m.safety.value, m.incent_c.value
                ));
            }
            say(format!("wrote {}", dir.display()));
            Ok(0)
        }
        Command::VerifyTheorem { pi_c, pi_d, .. } => {
            let (dir, outcome) = commands::verify(cfg, pi_c.as_deref(), pi_d.as_deref())?;
            for p in &outcome.properties {
                let status = match p.status {
                    PropertyStatus::Pass => "pass".to_string(),
                    other => format!("{other:?}"),
                };
                say(format!("{}: {status}", p.property));
            }
            say(format!("wrote {}", dir.display()));
            Ok(if outcome.passed { 0 } else { 1 })
        }
    }
}
