//! Round-robin tournaments between strategies built from a trained pool.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use super::matchup::game_seeds;
use super::stats::Summary;
use crate::agents::{AmtftAgent, AmtftConfig, CccAgent, CccConfig, CccPolicies, DecisionRule, FixedAgent};
use crate::env::MatrixGame;
use crate::policy::PolicyParams;
use crate::pomg::{play, Agent, Environment, Seat};
use crate::rng::{derive_path, rng_from_seed};
use crate::{Error, Result};

/// The strategies a tournament can field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StrategyKind {
    Cooperator,
    Defector,
    Ccc,
    CccHysteresis,
    Amtft,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::Cooperator,
        StrategyKind::Defector,
        StrategyKind::Ccc,
        StrategyKind::CccHysteresis,
        StrategyKind::Amtft,
    ];

    pub fn label(self) -> &'static str {
        match self {
            StrategyKind::Cooperator => "C",
            StrategyKind::Defector => "D",
            StrategyKind::Ccc => "CCC",
            StrategyKind::CccHysteresis => "CCC-H",
            StrategyKind::Amtft => "amTFT",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kind = match s.trim().to_ascii_lowercase().as_str() {
            "c" | "cooperator" => StrategyKind::Cooperator,
            "d" | "defector" => StrategyKind::Defector,
            "ccc" => StrategyKind::Ccc,
            "ccc-h" | "ccc_h" | "ccc-hysteresis" | "ccc_hysteresis" => StrategyKind::CccHysteresis,
            "amtft" => StrategyKind::Amtft,
            _ => return Err(Error::Config(format!("unknown strategy `{s}`"))),
        };
        Ok(kind)
    }
}

/// Parameters shared by every agent a tournament builds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategySettings {
    pub ccc: CccConfig,
    /// Rule used by [`StrategyKind::CccHysteresis`] (same `q` and `k` as `ccc`).
    pub hysteresis: DecisionRule,
    pub amtft: AmtftConfig,
}

impl Default for StrategySettings {
    fn default() -> Self {
        StrategySettings {
            ccc: CccConfig::default(),
            hysteresis: DecisionRule::Hysteresis { alpha_d: 0.1, alpha_c: 0.05 },
            amtft: AmtftConfig::default(),
        }
    }
}

/// One prosocial-trained pair and one selfish-trained pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolMember {
    pub cooperative: [PolicyParams; 2],
    pub selfish: [PolicyParams; 2],
}

impl PoolMember {
    /// Policies for an agent using slot `slot` of this member's pairs; the
    /// other slot models its partner.
    pub fn policies(&self, slot: usize) -> CccPolicies {
        let other = 1 - slot;
        CccPolicies {
            own_c: self.cooperative[slot].clone(),
            own_d: self.selfish[slot].clone(),
            partner_c: self.cooperative[other].clone(),
            partner_d: self.selfish[other].clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyPool {
    members: Vec<PoolMember>,
}

impl StrategyPool {
    pub fn new(members: Vec<PoolMember>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Config("strategy pool is empty".into()));
        }
        Ok(StrategyPool { members })
    }

    /// Exact always-cooperate and always-defect policies for a matrix game.
    pub fn builtin_matrix(game: &MatrixGame) -> Result<Self> {
        let inputs = game.observation_len();
        let n = game.action_count();
        let c = PolicyParams::constant(inputs, n, MatrixGame::COOPERATE, 50.0)?;
        let d = PolicyParams::constant(inputs, n, MatrixGame::DEFECT, 50.0)?;
        Self::new(alloc::vec![PoolMember { cooperative: [c.clone(), c], selfish: [d.clone(), d] }])
    }

    pub fn members(&self) -> &[PoolMember] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Two distinct members when the pool allows it.
    pub fn draw(&self, seed: u64) -> [usize; 2] {
        let n = self.members.len();
        if n < 2 {
            return [0, 0];
        }
        let mut rng = rng_from_seed(seed);
        let i = rng.gen_range(0..n);
        let mut j = rng.gen_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        [i, j]
    }
}

/// Builds an agent of `kind` sitting in `seat`, using slot `slot` of `member`.
pub fn build_agent<E>(
    env: &E,
    kind: StrategyKind,
    settings: &StrategySettings,
    member: &PoolMember,
    slot: usize,
    seat: Seat,
    seed: u64,
) -> Result<Box<dyn Agent<E::State>>>
where
    E: Environment + ?Sized,
    E::State: 'static,
{
    let agent: Box<dyn Agent<E::State>> = match kind {
        StrategyKind::Cooperator => Box::new(FixedAgent::new(member.cooperative[slot].clone())),
        StrategyKind::Defector => Box::new(FixedAgent::new(member.selfish[slot].clone())),
        StrategyKind::Ccc => Box::new(CccAgent::new(env, member.policies(slot), settings.ccc, seat, seed)?),
        StrategyKind::CccHysteresis => {
            let cfg = CccConfig { rule: settings.hysteresis, ..settings.ccc };
            Box::new(CccAgent::new(env, member.policies(slot), cfg, seat, seed)?)
        }
        StrategyKind::Amtft => Box::new(AmtftAgent::new(env, member.policies(slot), settings.amtft, seat, seed)?),
    };
    Ok(agent)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TournamentConfig {
    pub games_per_cell: usize,
    pub length: usize,
    pub seed: u64,
}

impl Default for TournamentConfig {
    fn default() -> Self {
        TournamentConfig { games_per_cell: 20, length: 1000, seed: 0 }
    }
}

/// Average total payoffs of the row strategy (`s1`) and the column strategy (`s2`).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CellResult {
    pub row: usize,
    pub col: usize,
    pub s1_mean: f64,
    pub s1_se: f64,
    pub s2_mean: f64,
    pub s2_se: f64,
    pub games: usize,
}

impl CellResult {
    pub fn from_totals(row: usize, col: usize, totals: &[[f64; 2]]) -> Self {
        let s1 = Summary::of(&totals.iter().map(|t| t[0]).collect::<Vec<_>>());
        let s2 = Summary::of(&totals.iter().map(|t| t[1]).collect::<Vec<_>>());
        CellResult {
            row,
            col,
            s1_mean: s1.mean,
            s1_se: s1.std_error,
            s2_mean: s2.mean,
            s2_se: s2.std_error,
            games: totals.len(),
        }
    }
}

/// Checks a strategy list before any game is played.
pub fn check_strategies(strategies: &[StrategyKind]) -> Result<()> {
    for (i, s) in strategies.iter().enumerate() {
        if strategies[..i].contains(s) {
            return Err(Error::Config(format!("strategy {s} listed twice")));
        }
    }
    for required in [StrategyKind::Cooperator, StrategyKind::Defector, StrategyKind::Ccc] {
        if !strategies.contains(&required) {
            return Err(Error::Config(format!("tournament needs strategy {required}")));
        }
    }
    Ok(())
}

/// Plays every game of one cell. Cells are independent, so callers may run
/// them in any order or in parallel.
#[allow(clippy::too_many_arguments)]
pub fn play_cell<E>(
    env: &E,
    strategies: &[StrategyKind],
    pool: &StrategyPool,
    settings: &StrategySettings,
    cfg: &TournamentConfig,
    row: usize,
    col: usize,
) -> Result<CellResult>
where
    E: Environment + ?Sized,
    E::State: 'static,
{
    if cfg.games_per_cell == 0 || cfg.length == 0 {
        return Err(Error::invalid("tournament", "games_per_cell and length must be positive"));
    }
    let cell_seed = derive_path(cfg.seed, &[row as u64, col as u64]);
    let mut totals = Vec::with_capacity(cfg.games_per_cell);
    for g in 0..cfg.games_per_cell as u64 {
        let (game_seed, agent_seeds) = game_seeds(cell_seed, g);
        let [i, j] = pool.draw(derive_path(game_seed, &[7]));
        let members = pool.members();
        let mut x = build_agent(env, strategies[row], settings, &members[i], 0, Seat::First, agent_seeds[0])?;
        let mut y = build_agent(env, strategies[col], settings, &members[j], 1, Seat::Second, agent_seeds[1])?;
        totals.push(play(env, [&mut *x, &mut *y], cfg.length, game_seed, |_, _, _| {})?);
    }
    Ok(CellResult::from_totals(row, col, &totals))
}

/// A value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StrategyMetrics {
    pub strategy: String,
    pub self_match: Estimate,
    pub safety: Estimate,
    pub incent_c: Estimate,
}

/// Payoff matrix of a tournament and the per-strategy metrics derived from it.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsReport {
    pub strategies: Vec<String>,
    /// Row-major, one per (row, col) pair.
    pub cells: Vec<CellResult>,
    pub metrics: Vec<StrategyMetrics>,
}

impl MetricsReport {
    /// Derives the metrics. Needs strategies labelled `C` and `D`.
    pub fn from_cells(strategies: Vec<String>, mut cells: Vec<CellResult>) -> Result<Self> {
        let n = strategies.len();
        cells.sort_by_key(|c| (c.row, c.col));
        let complete = cells.len() == n * n && cells.iter().enumerate().all(|(k, c)| (c.row, c.col) == (k / n, k % n));
        if !complete {
            return Err(Error::Config("payoff matrix is incomplete".into()));
        }
        let find = |label: &str| {
            strategies
                .iter()
                .position(|s| s == label)
                .ok_or_else(|| Error::Config(format!("metrics need a `{label}` strategy")))
        };
        let (c, d) = (find("C")?, find("D")?);
        let cell = |r: usize, k: usize| &cells[r * n + k];
        let diff = |a: f64, a_se: f64, b: f64, b_se: f64| Estimate {
            value: a - b,
            std_error: libm::sqrt(a_se * a_se + b_se * b_se),
        };
        let metrics = (0..n)
            .map(|x| {
                let own = cell(x, x);
                let vs_d = cell(x, d);
                let dd = cell(d, d);
                let vs_c = cell(x, c);
                StrategyMetrics {
                    strategy: strategies[x].clone(),
                    self_match: Estimate { value: own.s1_mean, std_error: own.s1_se },
                    safety: diff(vs_d.s1_mean, vs_d.s1_se, dd.s1_mean, dd.s1_se),
                    incent_c: diff(vs_c.s2_mean, vs_c.s2_se, vs_d.s2_mean, vs_d.s2_se),
                }
            })
            .collect();
        Ok(MetricsReport { strategies, cells, metrics })
    }

    /// Report from plain matrices of mean payoffs (no standard errors).
    pub fn from_means(strategies: &[&str], s1: &[Vec<f64>], s2: &[Vec<f64>]) -> Result<Self> {
        let n = strategies.len();
        if s1.len() != n || s2.len() != n || s1.iter().chain(s2).any(|r| r.len() != n) {
            return Err(Error::Config("payoff matrices must be square over the strategies".into()));
        }
        let cells = (0..n * n)
            .map(|k| {
                let (row, col) = (k / n, k % n);
                CellResult { row, col, s1_mean: s1[row][col], s1_se: 0.0, s2_mean: s2[row][col], s2_se: 0.0, games: 0 }
            })
            .collect();
        Self::from_cells(strategies.iter().map(|s| s.to_string()).collect(), cells)
    }

    pub fn cell(&self, row: usize, col: usize) -> &CellResult {
        &self.cells[row * self.strategies.len() + col]
    }

    pub fn metrics_for(&self, strategy: &str) -> Option<&StrategyMetrics> {
        self.metrics.iter().find(|m| m.strategy == strategy)
    }
}

/// Plays every cell in row-major order and derives the metrics.
pub fn run_tournament<E>(
    env: &E,
    strategies: &[StrategyKind],
    pool: &StrategyPool,
    settings: &StrategySettings,
    cfg: &TournamentConfig,
) -> Result<MetricsReport>
where
    E: Environment + ?Sized,
    E::State: 'static,
{
    check_strategies(strategies)?;
    let n = strategies.len();
    let cells = (0..n * n)
        .map(|k| play_cell(env, strategies, pool, settings, cfg, k / n, k % n))
        .collect::<Result<Vec<_>>>()?;
    MetricsReport::from_cells(strategies.iter().map(|s| s.label().to_string()).collect(), cells)
}
