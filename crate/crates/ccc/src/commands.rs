//! The five subcommands. Each writes into a fresh run directory and returns
//! what the caller needs to report.

use std::path::{Path, PathBuf};

use ccc_core::agents::{precompute_thresholds, CccPolicies};
use ccc_core::env::MatrixGame;
use ccc_core::eval::tournament::{build_agent, check_strategies, play_cell};
use ccc_core::eval::{
    run_matchup, verify_theorem, MetricsReport, PropertyReport, PropertyStatus, StrategyKind, StrategyPool, Summary,
};
use ccc_core::policy::{Architecture, PolicyParams};
use ccc_core::pomg::{Environment, Seat};
use ccc_core::rng::derive_path;
use ccc_core::training::Scheme;
use ccc_core::CheckpointError;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::envs::{matrix_game, with_env, EnvVisitor};
use crate::error::{CliError, CliResult};
use crate::output::{read_checkpoint, RunDir};
use crate::pool::{evaluate_pool, load_pool, save_pool, strategy_pool, train_pool, EvalRow, PoolEntry};

/// Episodes and turns used to score each trained pair.
pub const EVAL_EPISODES: usize = 20;
pub const EVAL_LENGTH: usize = 1000;

#[derive(Debug)]
pub struct TrainOutcome {
    pub dir: PathBuf,
    pub entries: Vec<PoolEntry>,
    pub evaluation: Vec<EvalRow>,
}

struct TrainVisitor<'a> {
    cfg: &'a RunConfig,
    dir: &'a RunDir,
}

impl EnvVisitor for TrainVisitor<'_> {
    type Output = CliResult<(Vec<PoolEntry>, Vec<EvalRow>)>;

    fn visit<E>(self, env: &E) -> Self::Output
    where
        E: Environment,
        E::State: 'static,
    {
        let schemes = match self.cfg.train.scheme {
            Some(s) => vec![s],
            None => vec![Scheme::Prosocial, Scheme::Selfish],
        };
        let entries = train_pool(env, self.cfg, &schemes)?;
        save_pool(self.dir, &entries)?;
        let evaluation = evaluate_pool(env, &entries, EVAL_EPISODES, EVAL_LENGTH, self.cfg.seed)?;
        self.dir.write_csv("evaluation.csv", &evaluation)?;
        Ok((entries, evaluation))
    }
}

pub fn train(cfg: &RunConfig) -> CliResult<TrainOutcome> {
    let dir = RunDir::create(cfg, "train")?;
    let (entries, evaluation) = with_env(&cfg.env, TrainVisitor { cfg, dir: &dir })??;
    Ok(TrainOutcome { dir: dir.path().to_path_buf(), entries, evaluation })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub turn: u64,
    pub threshold: f64,
    pub cc_quantile: f64,
    pub cd_mean: f64,
}

fn check_fits(path: &Path, policy: &PolicyParams, inputs: usize, actions: usize) -> CliResult<()> {
    let arch = policy.architecture();
    if arch.input_len() != inputs || arch.action_count() != actions {
        let source = ccc_core::Error::Checkpoint(CheckpointError::ArchitectureMismatch {
            expected: format!("{inputs} inputs and {actions} actions"),
            found: arch.to_string(),
        });
        return Err(CliError::Checkpoint { path: path.to_path_buf(), source });
    }
    Ok(())
}

struct ThresholdVisitor<'a> {
    cfg: &'a RunConfig,
    pi_c: (&'a Path, PolicyParams),
    pi_d: (&'a Path, PolicyParams),
}

impl EnvVisitor for ThresholdVisitor<'_> {
    type Output = CliResult<Vec<ThresholdRow>>;

    fn visit<E>(self, env: &E) -> Self::Output
    where
        E: Environment,
        E::State: 'static,
    {
        let spec = env.spec();
        for (path, p) in [&self.pi_c, &self.pi_d] {
            check_fits(path, p, spec.observation_lengths[0], spec.action_counts[0])?;
            check_fits(path, p, spec.observation_lengths[1], spec.action_counts[1])?;
        }
        let policies = CccPolicies::symmetric(self.pi_c.1, self.pi_d.1);
        let c = &self.cfg.ccc;
        let seed = derive_path(self.cfg.seed, &[4]);
        let schedule = precompute_thresholds(env, &policies, Seat::First, c.alpha, c.q, c.k, c.horizon, seed)?;
        Ok(schedule
            .stats()
            .iter()
            .map(|s| ThresholdRow {
                turn: s.turn,
                threshold: s.threshold(c.alpha),
                cc_quantile: s.cc_quantile,
                cd_mean: s.cd_mean,
            })
            .collect())
    }
}

/// Precomputes the CCC threshold schedule for a cooperative/selfish policy pair.
pub fn thresholds(cfg: &RunConfig, pi_c: &Path, pi_d: &Path) -> CliResult<(PathBuf, Vec<ThresholdRow>)> {
    let visitor = ThresholdVisitor {
        cfg,
        pi_c: (pi_c, read_checkpoint(pi_c)?),
        pi_d: (pi_d, read_checkpoint(pi_d)?),
    };
    let dir = RunDir::create(cfg, "thresholds")?;
    let rows = with_env(&cfg.env, visitor)??;
    dir.write_csv("thresholds.csv", &rows)?;
    Ok((dir.path().to_path_buf(), rows))
}

/// The pool a match or tournament draws from: loaded, built in for matrix
/// games, or trained on the spot (and saved alongside the results).
struct PoolVisitor<'a> {
    cfg: &'a RunConfig,
    dir: &'a RunDir,
}

impl EnvVisitor for PoolVisitor<'_> {
    type Output = CliResult<StrategyPool>;

    fn visit<E>(self, env: &E) -> Self::Output
    where
        E: Environment,
        E::State: 'static,
    {
        let entries = train_pool(env, self.cfg, &[Scheme::Prosocial, Scheme::Selfish])?;
        save_pool(self.dir, &entries)?;
        strategy_pool(&entries)
    }
}

fn resolve_pool(cfg: &RunConfig, dir: &RunDir) -> CliResult<StrategyPool> {
    if let Some(path) = &cfg.tournament.pool {
        return load_pool(path);
    }
    if cfg.env.kind.is_matrix() {
        return Ok(StrategyPool::builtin_matrix(&matrix_game(&cfg.env)?)?);
    }
    with_env(&cfg.env, PoolVisitor { cfg, dir })?
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameRow {
    pub game: usize,
    pub p1_total: f64,
    pub p2_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchReport {
    pub env: String,
    pub p1: String,
    pub p2: String,
    pub games: usize,
    pub length: usize,
    pub s1: Summary,
    pub s2: Summary,
}

struct MatchVisitor<'a> {
    cfg: &'a RunConfig,
    pool: &'a StrategyPool,
    kinds: [StrategyKind; 2],
}

impl EnvVisitor for MatchVisitor<'_> {
    type Output = CliResult<ccc_core::eval::MatchupResult>;

    fn visit<E>(self, env: &E) -> Self::Output
    where
        E: Environment,
        E::State: 'static,
    {
        let m = &self.cfg.matchup;
        let settings = self.cfg.strategy_settings();
        let draws: Vec<[usize; 2]> =
            (0..m.games as u64).map(|g| self.pool.draw(derive_path(self.cfg.seed, &[5, g]))).collect();
        let members = self.pool.members();
        let (draws, settings) = (&draws, &settings);
        let [kx, ky] = self.kinds;
        let mut make_x = |g: u64, seed: u64| {
            build_agent(env, kx, settings, &members[draws[g as usize][0]], 0, Seat::First, seed)
        };
        let mut make_y = |g: u64, seed: u64| {
            build_agent(env, ky, settings, &members[draws[g as usize][1]], 1, Seat::Second, seed)
        };
        Ok(run_matchup(env, &mut make_x, &mut make_y, m.games, m.length, self.cfg.seed, false)?)
    }
}

/// Plays `match.games` games between two strategies.
pub fn matchup(cfg: &RunConfig) -> CliResult<(PathBuf, MatchReport)> {
    let kinds = [crate::config::parse_strategy(&cfg.matchup.p1)?, crate::config::parse_strategy(&cfg.matchup.p2)?];
    if cfg.matchup.games == 0 || cfg.matchup.length == 0 {
        return Err(CliError::Usage("match.games and match.length must be positive".into()));
    }
    let dir = RunDir::create(cfg, "match")?;
    let pool = resolve_pool(cfg, &dir)?;
    let result = with_env(&cfg.env, MatchVisitor { cfg, pool: &pool, kinds })??;
    let rows: Vec<GameRow> = result
        .totals
        .iter()
        .enumerate()
        .map(|(game, t)| GameRow { game, p1_total: t[0], p2_total: t[1] })
        .collect();
    dir.write_csv("games.csv", &rows)?;
    let report = MatchReport {
        env: cfg.env.kind.label().to_string(),
        p1: kinds[0].label().to_string(),
        p2: kinds[1].label().to_string(),
        games: cfg.matchup.games,
        length: cfg.matchup.length,
        s1: result.s1,
        s2: result.s2,
    };
    dir.write_json("match.json", &report)?;
    Ok((dir.path().to_path_buf(), report))
}

struct TournamentVisitor<'a> {
    cfg: &'a RunConfig,
    pool: &'a StrategyPool,
    strategies: &'a [StrategyKind],
}

impl EnvVisitor for TournamentVisitor<'_> {
    type Output = CliResult<MetricsReport>;

    fn visit<E>(self, env: &E) -> Self::Output
    where
        E: Environment,
        E::State: 'static,
    {
        let n = self.strategies.len();
        let settings = self.cfg.strategy_settings();
        let tcfg = self.cfg.tournament_config();
        let cells = (0..n * n)
            .into_par_iter()
            .map(|k| play_cell(env, self.strategies, self.pool, &settings, &tcfg, k / n, k % n))
            .collect::<Result<Vec<_>, _>>()?;
        let labels = self.strategies.iter().map(|s| s.label().to_string()).collect();
        Ok(MetricsReport::from_cells(labels, cells)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRow {
    pub row: String,
    pub col: String,
    pub s1_mean: f64,
    pub s1_se: f64,
    pub s2_mean: f64,
    pub s2_se: f64,
    pub games: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub strategy: String,
    pub self_match: f64,
    pub self_match_se: f64,
    pub safety: f64,
    pub safety_se: f64,
    pub incent_c: f64,
    pub incent_c_se: f64,
}

/// Round robin over the configured strategies.
pub fn tournament(cfg: &RunConfig) -> CliResult<(PathBuf, MetricsReport)> {
    let strategies = cfg.strategies()?;
    check_strategies(&strategies)?;
    let dir = RunDir::create(cfg, "tournament")?;
    let pool = resolve_pool(cfg, &dir)?;
    let report = tournament_with_pool(cfg, &pool, &strategies)?;
    let cells: Vec<CellRow> = report
        .cells
        .iter()
        .map(|c| CellRow {
            row: report.strategies[c.row].clone(),
            col: report.strategies[c.col].clone(),
            s1_mean: c.s1_mean,
            s1_se: c.s1_se,
            s2_mean: c.s2_mean,
            s2_se: c.s2_se,
            games: c.games,
        })
        .collect();
    dir.write_csv("payoffs.csv", &cells)?;
    let metrics: Vec<MetricRow> = report
        .metrics
        .iter()
        .map(|m| MetricRow {
            strategy: m.strategy.clone(),
            self_match: m.self_match.value,
            self_match_se: m.self_match.std_error,
            safety: m.safety.value,
            safety_se: m.safety.std_error,
            incent_c: m.incent_c.value,
            incent_c_se: m.incent_c.std_error,
        })
        .collect();
    dir.write_csv("metrics.csv", &metrics)?;
    dir.write_json("tournament.json", &report)?;
    Ok((dir.path().to_path_buf(), report))
}

/// Runs the tournament cells in parallel against an existing pool.
pub fn tournament_with_pool(
    cfg: &RunConfig,
    pool: &StrategyPool,
    strategies: &[StrategyKind],
) -> CliResult<MetricsReport> {
    check_strategies(strategies)?;
    with_env(&cfg.env, TournamentVisitor { cfg, pool, strategies })?
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremOutcome {
    pub passed: bool,
    pub properties: Vec<PropertyReport>,
}

fn matrix_policy(game: &MatrixGame, path: Option<&Path>, action: usize) -> CliResult<PolicyParams> {
    let (inputs, actions) = (game.observation_len(), game.action_count());
    match path {
        Some(p) => {
            let policy = read_checkpoint(p)?;
            let expected = Architecture::Tabular { inputs, actions };
            if policy.architecture().input_len() != inputs || policy.action_count() != actions {
                let source = ccc_core::Error::Checkpoint(CheckpointError::ArchitectureMismatch {
                    expected: expected.to_string(),
                    found: policy.architecture().to_string(),
                });
                return Err(CliError::Checkpoint { path: p.to_path_buf(), source });
            }
            Ok(policy)
        }
        None => Ok(PolicyParams::constant(inputs, actions, action, 50.0)?),
    }
}

/// Checks the long-run guarantees on the configured matrix game. The
/// policies default to always-cooperate and always-defect.
pub fn verify(cfg: &RunConfig, pi_c: Option<&Path>, pi_d: Option<&Path>) -> CliResult<(PathBuf, TheoremOutcome)> {
    let game = matrix_game(&cfg.env)?;
    let c = matrix_policy(&game, pi_c, MatrixGame::COOPERATE)?;
    let d = matrix_policy(&game, pi_d, MatrixGame::DEFECT)?;
    let dir = RunDir::create(cfg, "verify-theorem")?;
    let properties = verify_theorem(&game, &c, &d, &cfg.theorem_config(), cfg.seed)?;
    let passed = properties.iter().all(|p| p.status == PropertyStatus::Pass);
    let outcome = TheoremOutcome { passed, properties };
    dir.write_json("theorem.json", &outcome)?;
    Ok((dir.path().to_path_buf(), outcome))
}
