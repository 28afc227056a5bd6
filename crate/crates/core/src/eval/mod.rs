//! Evaluation: exact rates for matrix games, matchups, tournaments, strategy
//! metrics and the long-run guarantee suites.

pub mod analytic;
pub mod matchup;
pub mod stats;
pub mod theorem;
pub mod tournament;

pub use analytic::{analytic_rate, AnalyticRate};
pub use matchup::{run_matchup, MatchupResult};
pub use stats::Summary;
pub use theorem::{verify_theorem, PropertyReport, PropertyStatus, TheoremConfig};
pub use tournament::{
    build_agent, check_strategies, play_cell, run_tournament, CellResult, Estimate, MetricsReport, PoolMember,
    StrategyKind, StrategyMetrics, StrategyPool, StrategySettings, TournamentConfig,
};
