//! Run configuration: one TOML file with a section per module, plus
//! command-line overrides applied on top.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use ccc_core::agents::{AmtftConfig, CccConfig, DecisionRule};
use ccc_core::env::{CoinsConfig, FisheryConfig, PenaltyTrigger};
use ccc_core::eval::{StrategyKind, StrategySettings, TheoremConfig, TournamentConfig};
use ccc_core::training::{Network, Scheme, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    #[default]
    MatrixPd,
    RiskyPd,
    Fishery,
    Coins,
}

impl EnvKind {
    pub fn label(self) -> &'static str {
        match self {
            EnvKind::MatrixPd => "matrix_pd",
            EnvKind::RiskyPd => "risky_pd",
            EnvKind::Fishery => "fishery",
            EnvKind::Coins => "coins",
        }
    }

    pub fn is_matrix(self) -> bool {
        matches!(self, EnvKind::MatrixPd | EnvKind::RiskyPd)
    }
}

impl FromStr for EnvKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "matrix_pd" | "pd" => Ok(EnvKind::MatrixPd),
            "risky_pd" => Ok(EnvKind::RiskyPd),
            "fishery" => Ok(EnvKind::Fishery),
            "coins" => Ok(EnvKind::Coins),
            _ => Err(format!("unknown environment `{s}` (expected matrix_pd, risky_pd, fishery or coins)")),
        }
    }
}

/// Symmetric payoffs of the matrix game, from the row player's side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Payoffs {
    pub cc: f64,
    pub cd: f64,
    pub dc: f64,
    pub dd: f64,
}

impl Default for Payoffs {
    fn default() -> Self {
        Payoffs { cc: 2.0, cd: 0.0, dc: 3.0, dd: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    pub kind: EnvKind,
    pub payoffs: Payoffs,
    /// Penalty probability of the risky variant.
    pub risky_p: f64,
    pub risky_trigger: PenaltyTrigger,
    pub fishery: FisheryConfig,
    pub coins: CoinsConfig,
}

impl Default for EnvSection {
    fn default() -> Self {
        EnvSection {
            kind: EnvKind::default(),
            payoffs: Payoffs::default(),
            risky_p: 0.1,
            risky_trigger: PenaltyTrigger::default(),
            fishery: FisheryConfig::default(),
            coins: CoinsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    /// Train only this scheme; both when unset.
    pub scheme: Option<Scheme>,
    /// Pairs per scheme.
    pub pairs: usize,
    /// Hidden layer widths; matrix games use a tabular policy when unset.
    pub hidden: Option<Vec<usize>>,
    pub batches: usize,
    pub batch_size: usize,
    pub episode_length: usize,
    /// 3e-3 on matrix games and 1e-3 on gridworlds when unset.
    pub learning_rate: Option<f64>,
    pub discount: f64,
    pub entropy_weight: f64,
    pub init_scale: f64,
    pub eval_every: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            scheme: None,
            pairs: 5,
            hidden: None,
            batches: t.batches,
            batch_size: t.batch_size,
            episode_length: t.episode_length,
            learning_rate: None,
            discount: t.discount,
            entropy_weight: t.entropy_weight,
            init_scale: t.init_scale,
            eval_every: t.eval_every,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CccSection {
    pub alpha: f64,
    pub q: f64,
    pub k: usize,
    /// Hysteresis thresholds for the CCC-H strategy.
    pub alpha_d: f64,
    pub alpha_c: f64,
    /// Turns covered by `thresholds`.
    pub horizon: usize,
}

impl Default for CccSection {
    fn default() -> Self {
        CccSection { alpha: 0.05, q: 0.1, k: 32, alpha_d: 0.1, alpha_c: 0.05, horizon: 1000 }
    }
}

impl CccSection {
    pub fn config(&self) -> CccConfig {
        CccConfig { rule: DecisionRule::Single { alpha: self.alpha }, q: self.q, k: self.k }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmtftSection {
    /// 1.0 on matrix games and 2.0 on Coins when unset.
    pub debit_threshold: Option<f64>,
    pub rollouts: usize,
    pub rollout_horizon: usize,
    pub max_punishment: usize,
    pub punishment_multiplier: f64,
}

impl Default for AmtftSection {
    fn default() -> Self {
        let a = AmtftConfig::default();
        AmtftSection {
            debit_threshold: None,
            rollouts: a.rollouts,
            rollout_horizon: a.rollout_horizon,
            max_punishment: a.max_punishment,
            punishment_multiplier: a.punishment_multiplier,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TournamentSection {
    /// Every strategy the environment supports when unset.
    pub strategies: Option<Vec<String>>,
    pub games_per_cell: usize,
    pub length: usize,
    /// Directory of pool checkpoints written by `train`.
    pub pool: Option<PathBuf>,
}

impl Default for TournamentSection {
    fn default() -> Self {
        TournamentSection { strategies: None, games_per_cell: 20, length: 1000, pool: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchSection {
    pub p1: String,
    pub p2: String,
    pub games: usize,
    pub length: usize,
}

impl Default for MatchSection {
    fn default() -> Self {
        MatchSection { p1: "CCC".into(), p2: "D".into(), games: 22, length: 1000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheoremSection {
    pub seeds: usize,
    pub horizon: usize,
    pub burn_in: usize,
    pub tolerance: f64,
    pub required_fraction: f64,
    pub min_horizon: usize,
    pub defect_turns: usize,
    pub forgiveness_window: usize,
    pub gift_cost: f64,
    pub gift_value: f64,
}

impl Default for TheoremSection {
    fn default() -> Self {
        let t = TheoremConfig::default();
        TheoremSection {
            seeds: t.seeds,
            horizon: t.horizon,
            burn_in: t.burn_in,
            tolerance: t.tolerance,
            required_fraction: t.required_fraction,
            min_horizon: t.min_horizon,
            defect_turns: t.defect_turns,
            forgiveness_window: t.forgiveness_window,
            gift_cost: t.gift_cost,
            gift_value: t.gift_value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Parent directory of run directories.
    pub out: PathBuf,
    /// Worker threads; 0 lets the runtime decide.
    pub threads: usize,
    pub env: EnvSection,
    pub train: TrainSection,
    pub ccc: CccSection,
    pub amtft: AmtftSection,
    pub tournament: TournamentSection,
    #[serde(rename = "match")]
    pub matchup: MatchSection,
    pub theorem: TheoremSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out: PathBuf::from("runs"),
            threads: 0,
            env: EnvSection::default(),
            train: TrainSection::default(),
            ccc: CccSection::default(),
            amtft: AmtftSection::default(),
            tournament: TournamentSection::default(),
            matchup: MatchSection::default(),
            theorem: TheoremSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config always serializes")
    }

    /// Fills every environment-dependent default so the config can be
    /// written back out and replayed exactly.
    pub fn resolve(mut self) -> Self {
        let matrix = self.env.kind.is_matrix();
        self.train.learning_rate.get_or_insert(if matrix { 3e-3 } else { 1e-3 });
        if self.train.hidden.is_none() && !matrix {
            self.train.hidden = Some(vec![64, 64]);
        }
        let theta = if self.env.kind == EnvKind::Coins { 2.0 } else { 1.0 };
        self.amtft.debit_threshold.get_or_insert(theta);
        if self.tournament.strategies.is_none() {
            let mut s = vec!["C", "D", "CCC", "CCC-H"];
            if self.env.kind != EnvKind::Fishery {
                s.push("amTFT");
            }
            self.tournament.strategies = Some(s.into_iter().map(String::from).collect());
        }
        self
    }

    pub fn validate(&self) -> CliResult<()> {
        self.train_config(Scheme::Selfish, 0).validate()?;
        if self.train.pairs == 0 {
            return Err(CliError::Usage("train.pairs must be at least 1".into()));
        }
        self.ccc.config().validate()?;
        self.strategy_settings().hysteresis.validate()?;
        self.amtft_config().validate()?;
        self.env.fishery.validate()?;
        self.env.coins.validate()?;
        if self.ccc.horizon == 0 {
            return Err(CliError::Usage("ccc.horizon must be at least 1".into()));
        }
        self.strategies()?;
        Ok(())
    }

    pub fn network(&self) -> Network {
        match &self.train.hidden {
            Some(hidden) => Network::Feedforward { hidden: hidden.clone() },
            None => Network::Tabular,
        }
    }

    pub fn train_config(&self, scheme: Scheme, seed: u64) -> TrainConfig {
        TrainConfig {
            scheme,
            network: self.network(),
            batches: self.train.batches,
            batch_size: self.train.batch_size,
            episode_length: self.train.episode_length,
            learning_rate: self.train.learning_rate.unwrap_or(1e-3),
            discount: self.train.discount,
            entropy_weight: self.train.entropy_weight,
            init_scale: self.train.init_scale,
            eval_every: self.train.eval_every,
            seed,
        }
    }

    pub fn amtft_config(&self) -> AmtftConfig {
        AmtftConfig {
            debit_threshold: self.amtft.debit_threshold.unwrap_or(1.0),
            rollouts: self.amtft.rollouts,
            rollout_horizon: self.amtft.rollout_horizon,
            max_punishment: self.amtft.max_punishment,
            punishment_multiplier: self.amtft.punishment_multiplier,
        }
    }

    pub fn strategy_settings(&self) -> StrategySettings {
        StrategySettings {
            ccc: self.ccc.config(),
            hysteresis: DecisionRule::Hysteresis { alpha_d: self.ccc.alpha_d, alpha_c: self.ccc.alpha_c },
            amtft: self.amtft_config(),
        }
    }

    pub fn strategies(&self) -> CliResult<Vec<StrategyKind>> {
        let names = self.tournament.strategies.clone().unwrap_or_default();
        names.iter().map(|s| parse_strategy(s)).collect()
    }

    pub fn tournament_config(&self) -> TournamentConfig {
        TournamentConfig {
            games_per_cell: self.tournament.games_per_cell,
            length: self.tournament.length,
            seed: self.seed,
        }
    }

    pub fn theorem_config(&self) -> TheoremConfig {
        let t = &self.theorem;
        TheoremConfig {
            seeds: t.seeds,
            horizon: t.horizon,
            burn_in: t.burn_in,
            tolerance: t.tolerance,
            required_fraction: t.required_fraction,
            min_horizon: t.min_horizon,
            ccc: self.ccc.config(),
            defect_turns: t.defect_turns,
            forgiveness_window: t.forgiveness_window,
            gift_cost: t.gift_cost,
            gift_value: t.gift_value,
        }
    }
}

pub fn parse_strategy(name: &str) -> CliResult<StrategyKind> {
    name.trim().parse().map_err(|e: ccc_core::Error| CliError::Usage(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_validate() {
        let cfg = RunConfig::default().resolve();
        cfg.validate().unwrap();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::from_toml("sed = 3"), Err(CliError::Usage(_))));
        assert!(RunConfig::from_toml("[ccc]\nalpah = 0.1").is_err());
        assert!(RunConfig::from_toml("[env.fishery]\nrow = 5").is_err());
    }

    #[test]
    fn partial_sections_keep_defaults() {
        let cfg = RunConfig::from_toml("seed = 9\n[ccc]\nk = 8\n[env]\nkind = \"fishery\"").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.ccc.k, 8);
        assert_eq!(cfg.ccc.q, 0.1);
        let cfg = cfg.resolve();
        assert_eq!(cfg.train.learning_rate, Some(1e-3));
        assert_eq!(cfg.train.hidden, Some(vec![64, 64]));
        assert!(!cfg.strategies().unwrap().contains(&StrategyKind::Amtft));
    }

    #[test]
    fn environment_dependent_defaults() {
        let mut cfg = RunConfig::default();
        cfg.env.kind = EnvKind::Coins;
        let cfg = cfg.resolve();
        assert_eq!(cfg.amtft_config().debit_threshold, 2.0);
        let pd = RunConfig::default().resolve();
        assert_eq!(pd.amtft_config().debit_threshold, 1.0);
        assert_eq!(pd.network(), Network::Tabular);
        assert_eq!(pd.train.learning_rate, Some(3e-3));
    }
}
