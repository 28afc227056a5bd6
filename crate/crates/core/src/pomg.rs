//! Two-player partially observed Markov games.
//!
//! An [`Environment`] describes a game and creates seeded [`WorldState`]s. Both
//! players move simultaneously; each sees only its own observation vector and
//! its own reward. Agents plug in through the [`Agent`] trait.

use alloc::vec;
use alloc::vec::Vec;

use crate::agents::FixedAgent;
use crate::eval::stats::Summary;
use crate::policy::PolicyParams;
use crate::rng::{derive_seed, rng_from_seed, SimRng};
use crate::{Error, Result};

/// One of the two seats of a game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Seat {
    First,
    Second,
}

impl Seat {
    pub const BOTH: [Seat; 2] = [Seat::First, Seat::Second];

    pub fn index(self) -> usize {
        match self {
            Seat::First => 0,
            Seat::Second => 1,
        }
    }

    pub fn other(self) -> Seat {
        match self {
            Seat::First => Seat::Second,
            Seat::Second => Seat::First,
        }
    }
}

/// Static description of a game.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameSpec {
    /// Short layout name, e.g. `"fishery"`.
    pub name: &'static str,
    pub action_counts: [usize; 2],
    pub observation_lengths: [usize; 2],
    /// `None` for games without a natural end; experiments always run fixed lengths.
    pub max_episode_length: Option<u64>,
    /// Upper bound on `|r|` for every reward any step can emit.
    pub reward_bound: f64,
    /// Whether the full world state can be read off either observation.
    pub fully_observed: bool,
}

impl GameSpec {
    pub(crate) fn check_actions(&self, actions: [usize; 2]) -> Result<()> {
        for (seat, (&action, &count)) in actions.iter().zip(&self.action_counts).enumerate() {
            if action >= count {
                return Err(Error::ActionOutOfRange { seat, action, count });
            }
        }
        Ok(())
    }
}

/// Rewards produced by one joint move.
///
/// `penalties[i]` is the part of `rewards[i]` inflicted on player `i` by the
/// partner's move (always `<= 0`). The risky-reward wrapper rescales exactly
/// this component.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Payoffs {
    pub rewards: [f64; 2],
    pub penalties: [f64; 2],
}

/// Result of [`WorldState::step`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observations: [Vec<f64>; 2],
    pub rewards: [f64; 2],
    pub terminal: bool,
}

/// Evolving hidden state of a game, including its own generator.
///
/// Advancing two clones with the same joint action yields bit-identical
/// successors.
pub trait WorldState: Clone + Send {
    fn spec(&self) -> GameSpec;

    /// Number of joint moves applied so far.
    fn turn(&self) -> u64;

    fn is_terminal(&self) -> bool {
        self.spec().max_episode_length.is_some_and(|max| self.turn() >= max)
    }

    /// Writes `seat`'s observation into `out` (length `observation_lengths[seat]`).
    fn observe(&self, seat: Seat, out: &mut [f64]);

    /// Applies a joint move.
    fn advance(&mut self, actions: [usize; 2]) -> Result<Payoffs>;

    /// [`advance`](Self::advance) followed by both observations.
    fn step(&mut self, a1: usize, a2: usize) -> Result<StepOutcome> {
        let payoffs = self.advance([a1, a2])?;
        let spec = self.spec();
        let mut observations = [
            vec![0.0; spec.observation_lengths[0]],
            vec![0.0; spec.observation_lengths[1]],
        ];
        for seat in Seat::BOTH {
            self.observe(seat, &mut observations[seat.index()]);
        }
        Ok(StepOutcome { observations, rewards: payoffs.rewards, terminal: self.is_terminal() })
    }
}

/// A game definition that can start new seeded episodes.
pub trait Environment: Send + Sync {
    type State: WorldState;

    fn spec(&self) -> GameSpec;

    fn new_state(&self, seed: u64) -> Self::State;
}

/// Everything that happened in one turn of a fully observed game.
///
/// Only agents that ask for it ([`Agent::wants_public_record`]) receive this,
/// and only when the game is fully observed.
pub struct PublicTurn<'a, S> {
    /// Seat of the agent receiving the record.
    pub seat: Seat,
    pub before: &'a S,
    pub after: &'a S,
    pub actions: [usize; 2],
}

/// A test-time strategy.
///
/// The runner calls [`act`](Agent::act) with the agent's own observation, then
/// [`observe`](Agent::observe) with the agent's own reward, once per turn.
pub trait Agent<S: WorldState> {
    fn act(&mut self, obs: &[f64], rng: &mut SimRng) -> Result<usize>;

    fn observe(&mut self, reward: f64) -> Result<()>;

    fn wants_public_record(&self) -> bool {
        false
    }

    fn witness(&mut self, _turn: &PublicTurn<'_, S>) -> Result<()> {
        Ok(())
    }
}

impl<S: WorldState, A: Agent<S> + ?Sized> Agent<S> for alloc::boxed::Box<A> {
    fn act(&mut self, obs: &[f64], rng: &mut SimRng) -> Result<usize> {
        (**self).act(obs, rng)
    }

    fn observe(&mut self, reward: f64) -> Result<()> {
        (**self).observe(reward)
    }

    fn wants_public_record(&self) -> bool {
        (**self).wants_public_record()
    }

    fn witness(&mut self, turn: &PublicTurn<'_, S>) -> Result<()> {
        (**self).witness(turn)
    }
}

/// One turn of an [`EpisodeTrace`].
#[derive(Debug, Clone, PartialEq)]
pub struct TurnRecord {
    /// Observations each player acted on.
    pub observations: [Vec<f64>; 2],
    pub actions: [usize; 2],
    pub rewards: [f64; 2],
    /// Running totals including this turn.
    pub cumulative: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub seed: u64,
    pub turns: Vec<TurnRecord>,
}

impl EpisodeTrace {
    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    pub fn totals(&self) -> [f64; 2] {
        self.turns.last().map_or([0.0; 2], |t| t.cumulative)
    }
}

/// Seeds of the world and of each seat's action sampler for one episode.
pub(crate) fn episode_seeds(seed: u64) -> (u64, [u64; 2]) {
    (derive_seed(seed, 0), [derive_seed(seed, 1), derive_seed(seed, 2)])
}

/// Plays up to `length` turns between two agents and hands each turn to `record`.
pub(crate) fn play<E, F>(
    env: &E,
    agents: [&mut dyn Agent<E::State>; 2],
    length: usize,
    seed: u64,
    mut record: F,
) -> Result<[f64; 2]>
where
    E: Environment + ?Sized,
    F: FnMut(&[Vec<f64>; 2], [usize; 2], [f64; 2]),
{
    let [a1, a2] = agents;
    let (world_seed, agent_seeds) = episode_seeds(seed);
    let mut state = env.new_state(world_seed);
    let spec = env.spec();
    let mut rngs = [rng_from_seed(agent_seeds[0]), rng_from_seed(agent_seeds[1])];
    let mut obs = [vec![0.0; spec.observation_lengths[0]], vec![0.0; spec.observation_lengths[1]]];
    let public = spec.fully_observed && (a1.wants_public_record() || a2.wants_public_record());
    let mut totals = [0.0; 2];
    for _ in 0..length {
        if state.is_terminal() {
            break;
        }
        state.observe(Seat::First, &mut obs[0]);
        state.observe(Seat::Second, &mut obs[1]);
        let actions = [a1.act(&obs[0], &mut rngs[0])?, a2.act(&obs[1], &mut rngs[1])?];
        let before = public.then(|| state.clone());
        let payoffs = state.advance(actions)?;
        a1.observe(payoffs.rewards[0])?;
        a2.observe(payoffs.rewards[1])?;
        if let Some(before) = &before {
            for (seat, agent) in [(Seat::First, &mut *a1), (Seat::Second, &mut *a2)] {
                if agent.wants_public_record() {
                    agent.witness(&PublicTurn { seat, before, after: &state, actions })?;
                }
            }
        }
        totals[0] += payoffs.rewards[0];
        totals[1] += payoffs.rewards[1];
        record(&obs, actions, payoffs.rewards);
    }
    Ok(totals)
}

/// Runs one episode of at most `length` turns and records everything.
///
/// The world and both samplers draw from streams derived from `seed`, so the
/// same inputs reproduce the same trace.
pub fn run_episode<E: Environment + ?Sized>(
    env: &E,
    pi1: &mut dyn Agent<E::State>,
    pi2: &mut dyn Agent<E::State>,
    length: usize,
    seed: u64,
) -> Result<EpisodeTrace> {
    if length == 0 {
        return Err(Error::invalid("length", "episode length must be at least 1"));
    }
    let mut turns = Vec::with_capacity(length);
    let mut cumulative = [0.0; 2];
    play(env, [pi1, pi2], length, seed, |obs, actions, rewards| {
        cumulative[0] += rewards[0];
        cumulative[1] += rewards[1];
        turns.push(TurnRecord { observations: obs.clone(), actions, rewards, cumulative });
    })?;
    Ok(EpisodeTrace { seed, turns })
}

/// Monte Carlo estimate of a long-run reward rate.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RateEstimate {
    /// Mean reward per turn.
    pub rate: f64,
    /// Half-width of the 95% confidence interval (`1.96` standard errors).
    pub half_width: f64,
    pub turns_used: u64,
    pub episodes_used: u64,
}

impl RateEstimate {
    pub const Z95: f64 = 1.96;

    pub fn std_error(&self) -> f64 {
        self.half_width / Self::Z95
    }
}

/// Estimates both players' average reward per turn for a pair of stateless
/// policies: the mean over `episodes` of each episode's time-averaged reward,
/// with the interval taken from the across-episode standard error.
pub fn estimate_rate<E: Environment + ?Sized>(
    env: &E,
    pi1: &PolicyParams,
    pi2: &PolicyParams,
    episodes: usize,
    length: usize,
    seed: u64,
) -> Result<[RateEstimate; 2]> {
    if episodes == 0 {
        return Err(Error::invalid("episodes", "need at least one episode"));
    }
    if length == 0 {
        return Err(Error::invalid("length", "episode length must be at least 1"));
    }
    let mut per_episode: [Vec<f64>; 2] = [Vec::with_capacity(episodes), Vec::with_capacity(episodes)];
    let mut turns_used = 0u64;
    for e in 0..episodes {
        let mut a1 = FixedAgent::new(pi1.clone());
        let mut a2 = FixedAgent::new(pi2.clone());
        let mut turns = 0u64;
        let totals = play(env, [&mut a1, &mut a2], length, derive_seed(seed, e as u64), |_, _, _| turns += 1)?;
        turns_used += turns;
        let turns = turns.max(1) as f64;
        per_episode[0].push(totals[0] / turns);
        per_episode[1].push(totals[1] / turns);
    }
    let estimate = |samples: &[f64]| {
        let s = Summary::of(samples);
        RateEstimate {
            rate: s.mean,
            half_width: RateEstimate::Z95 * s.std_error,
            turns_used,
            episodes_used: episodes as u64,
        }
    };
    Ok([estimate(&per_episode[0]), estimate(&per_episode[1])])
}
