//! Turning the configured environment into a concrete game.

use ccc_core::env::{Coins, Fishery, MatrixGame, Risky, RiskyRewardConfig};
use ccc_core::pomg::Environment;

use crate::config::{EnvKind, EnvSection};
use crate::error::CliResult;

/// Work that is generic over the environment type.
pub trait EnvVisitor {
    type Output;

    fn visit<E>(self, env: &E) -> Self::Output
    where
        E: Environment,
        E::State: 'static;
}

pub fn matrix_game(section: &EnvSection) -> CliResult<MatrixGame> {
    let p = section.payoffs;
    Ok(MatrixGame::from_symmetric(p.cc, p.cd, p.dc, p.dd)?)
}

pub fn with_env<V: EnvVisitor>(section: &EnvSection, visitor: V) -> CliResult<V::Output> {
    Ok(match section.kind {
        EnvKind::MatrixPd => visitor.visit(&matrix_game(section)?),
        EnvKind::RiskyPd => {
            let cfg = RiskyRewardConfig { p: section.risky_p, trigger: section.risky_trigger };
            visitor.visit(&Risky::new(matrix_game(section)?, cfg)?)
        }
        EnvKind::Fishery => visitor.visit(&Fishery::new(section.fishery)?),
        EnvKind::Coins => visitor.visit(&Coins::new(section.coins)?),
    })
}
