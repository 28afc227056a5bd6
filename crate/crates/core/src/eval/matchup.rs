//! Repeated games between two strategies.

use alloc::boxed::Box;
use alloc::vec::Vec;

use super::stats::Summary;
use crate::pomg::{play, run_episode, Agent, Environment, EpisodeTrace};
use crate::rng::derive_seed;
use crate::{Error, Result};

/// Builds a fresh agent for game `game` from a seed reserved for it.
pub type AgentFactory<'a, S> = dyn FnMut(u64, u64) -> Result<Box<dyn Agent<S>>> + 'a;

#[derive(Debug, Clone, PartialEq)]
pub struct MatchupResult {
    /// Total payoff of the first strategy per game.
    pub s1: Summary,
    pub s2: Summary,
    pub totals: Vec<[f64; 2]>,
    /// Filled only when traces were requested.
    pub traces: Vec<EpisodeTrace>,
}

/// Seeds used for game `g`: the episode itself and each side's agent.
pub fn game_seeds(seed: u64, g: u64) -> (u64, [u64; 2]) {
    let game = derive_seed(seed, g);
    (game, [derive_seed(game, 101), derive_seed(game, 102)])
}

/// Plays `games` games of `length` turns with fresh agents each game.
pub fn run_matchup<E: Environment + ?Sized>(
    env: &E,
    make_x: &mut AgentFactory<'_, E::State>,
    make_y: &mut AgentFactory<'_, E::State>,
    games: usize,
    length: usize,
    seed: u64,
    keep_traces: bool,
) -> Result<MatchupResult> {
    if games == 0 {
        return Err(Error::invalid("games", "need at least one game"));
    }
    if length == 0 {
        return Err(Error::invalid("length", "episode length must be at least 1"));
    }
    let mut totals = Vec::with_capacity(games);
    let mut traces = Vec::new();
    for g in 0..games as u64 {
        let (game_seed, agent_seeds) = game_seeds(seed, g);
        let mut x = make_x(g, agent_seeds[0])?;
        let mut y = make_y(g, agent_seeds[1])?;
        if keep_traces {
            let trace = run_episode(env, &mut *x, &mut *y, length, game_seed)?;
            totals.push(trace.totals());
            traces.push(trace);
        } else {
            totals.push(play(env, [&mut *x, &mut *y], length, game_seed, |_, _, _| {})?);
        }
    }
    let column = |i: usize| totals.iter().map(|t: &[f64; 2]| t[i]).collect::<Vec<_>>();
    Ok(MatchupResult { s1: Summary::of(&column(0)), s2: Summary::of(&column(1)), totals, traces })
}
