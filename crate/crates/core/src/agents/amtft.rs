//! Approximate Markov tit-for-tat, driven by rollouts.
//!
//! Each turn the agent checks whether the partner's action matches what the
//! partner's cooperative policy would most likely have done. If not, it
//! estimates the partner's gain from the deviation with paired rollouts (same
//! world randomness, both branches continuing under mutual cooperation) and
//! adds it to a running debit. Once the debit reaches the threshold it plays
//! its defecting policy for the shortest stretch whose rollout-estimated cost
//! to the partner covers `punishment_multiplier` times the debit, then starts
//! over with a clean slate.

use alloc::string::ToString;
use alloc::vec::Vec;

use super::{seated, CccPolicies, Mode, Protocol, Simulator};
use crate::policy::{sample_index, Workspace};
use crate::pomg::{Agent, Environment, PublicTurn, Seat, WorldState};
use crate::rng::{derive_path, rng_from_seed, SimRng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AmtftConfig {
    /// Debit at which punishment starts.
    pub debit_threshold: f64,
    /// Paired rollouts per counterfactual estimate.
    pub rollouts: usize,
    /// Turns of mutual cooperation simulated after the deviation or punishment.
    pub rollout_horizon: usize,
    pub max_punishment: usize,
    /// Punishment must cost the partner this many times the debit.
    pub punishment_multiplier: f64,
}

impl Default for AmtftConfig {
    fn default() -> Self {
        AmtftConfig {
            debit_threshold: 1.0,
            rollouts: 16,
            rollout_horizon: 20,
            max_punishment: 50,
            punishment_multiplier: 10.0,
        }
    }
}

impl AmtftConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.debit_threshold > 0.0) || !self.debit_threshold.is_finite() {
            return Err(Error::invalid("debit_threshold", "must be positive"));
        }
        if self.rollouts == 0 || self.max_punishment == 0 {
            return Err(Error::invalid("amtft", "rollouts and max_punishment must be positive"));
        }
        if !(self.punishment_multiplier > 0.0) {
            return Err(Error::invalid("punishment_multiplier", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct AmtftAgent<S> {
    policies: CccPolicies,
    cfg: AmtftConfig,
    seat: Seat,
    seed: u64,
    decisions: u64,
    debit: f64,
    punish_remaining: usize,
    punishments: usize,
    last_gain: Option<f64>,
    protocol: Protocol,
    modes: Vec<Mode>,
    sim: Simulator,
    ws: Workspace,
    _state: core::marker::PhantomData<fn() -> S>,
}

impl<S: WorldState> AmtftAgent<S> {
    pub fn new<E>(env: &E, policies: CccPolicies, cfg: AmtftConfig, seat: Seat, seed: u64) -> Result<Self>
    where
        E: Environment<State = S> + ?Sized,
    {
        let spec = env.spec();
        if !spec.fully_observed {
            return Err(Error::UnsupportedEnvironment(spec.name.to_string()));
        }
        cfg.validate()?;
        policies.validate(&env.new_state(seed), seat)?;
        Ok(AmtftAgent {
            policies,
            cfg,
            seat,
            seed,
            decisions: 0,
            debit: 0.0,
            punish_remaining: 0,
            punishments: 0,
            last_gain: None,
            protocol: Protocol::default(),
            modes: Vec::new(),
            sim: Simulator::default(),
            ws: Workspace::default(),
            _state: core::marker::PhantomData,
        })
    }

    pub fn debit(&self) -> f64 {
        self.debit
    }

    pub fn punishing(&self) -> bool {
        self.punish_remaining > 0
    }

    pub fn punish_remaining(&self) -> usize {
        self.punish_remaining
    }

    /// Punishment phases started so far.
    pub fn punishments(&self) -> usize {
        self.punishments
    }

    /// Gain estimate from the most recent deviation.
    pub fn last_gain(&self) -> Option<f64> {
        self.last_gain
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    fn next_rngs(&mut self) -> Vec<SimRng> {
        self.decisions += 1;
        (0..self.cfg.rollouts as u64).map(|r| rng_from_seed(derive_path(self.seed, &[self.decisions, r]))).collect()
    }

    /// Partner's extra reward from `taken` over `instead`, averaged over paired rollouts.
    fn one_shot_gain(&mut self, before: &S, taken: [usize; 2], instead: [usize; 2]) -> Result<f64> {
        let partner = self.seat.other().index();
        let rngs = self.next_rngs();
        let coop = seated(self.seat, &self.policies.own_c, &self.policies.partner_c);
        let tail = self.cfg.rollout_horizon.saturating_sub(1);
        let mut total = 0.0;
        for rng in &rngs {
            let mut value = [0.0; 2];
            for (branch, actions) in [taken, instead].into_iter().enumerate() {
                let mut state = before.clone();
                let first = state.advance(actions)?.rewards[partner];
                let rest = self.sim.roll(&mut state, coop, tail, &mut rng.clone())?[partner];
                value[branch] = first + rest;
            }
            total += value[0] - value[1];
        }
        Ok(total / rngs.len() as f64)
    }

    /// Shortest punishment whose estimated cost to the partner reaches `target`.
    fn punishment_length(&mut self, after: &S, target: f64) -> Result<usize> {
        let partner = self.seat.other().index();
        let rngs = self.next_rngs();
        let p = &self.policies;
        let coop = seated(self.seat, &p.own_c, &p.partner_c);
        let defect = seated(self.seat, &p.own_d, &p.partner_d);
        let horizon = self.cfg.rollout_horizon;
        for m in 1..=self.cfg.max_punishment {
            let mut loss = 0.0;
            for rng in &rngs {
                let mut rng_c = rng.clone();
                let mut cooperative = after.clone();
                let kept = self.sim.roll(&mut cooperative, coop, m + horizon, &mut rng_c)?[partner];
                let mut rng_d = rng.clone();
                let mut punished = after.clone();
                let during = self.sim.roll(&mut punished, defect, m, &mut rng_d)?[partner];
                let rest = self.sim.roll(&mut punished, coop, horizon, &mut rng_d)?[partner];
                loss += kept - during - rest;
            }
            if loss / rngs.len() as f64 >= target {
                return Ok(m);
            }
        }
        Ok(self.cfg.max_punishment)
    }
}

impl<S: WorldState> Agent<S> for AmtftAgent<S> {
    fn act(&mut self, obs: &[f64], rng: &mut SimRng) -> Result<usize> {
        self.protocol.on_act()?;
        let (mode, policy) = if self.punishing() {
            (Mode::Defect, &self.policies.own_d)
        } else {
            (Mode::Cooperate, &self.policies.own_c)
        };
        let probs = policy.forward_into(obs, &mut self.ws)?;
        self.modes.push(mode);
        Ok(sample_index(probs, rng))
    }

    fn observe(&mut self, _reward: f64) -> Result<()> {
        self.protocol.on_observe()
    }

    fn wants_public_record(&self) -> bool {
        true
    }

    fn witness(&mut self, turn: &PublicTurn<'_, S>) -> Result<()> {
        if turn.seat != self.seat {
            return Err(Error::Protocol("public record addressed to the other seat"));
        }
        if self.punish_remaining > 0 {
            self.punish_remaining -= 1;
            return Ok(());
        }
        let partner = self.seat.other();
        let expected = self.sim.greedy_action(turn.before, partner, &self.policies.partner_c)?;
        if turn.actions[partner.index()] == expected {
            return Ok(());
        }
        let mut instead = turn.actions;
        instead[partner.index()] = expected;
        let gain = self.one_shot_gain(turn.before, turn.actions, instead)?;
        self.last_gain = Some(gain);
        self.debit += gain.max(0.0);
        if self.debit >= self.cfg.debit_threshold {
            let target = self.cfg.punishment_multiplier * self.debit;
            self.punish_remaining = self.punishment_length(turn.after, target)?;
            self.punishments += 1;
            self.debit = 0.0;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::FixedAgent;
    use crate::env::{Fishery, FisheryConfig, MatrixGame, MatrixState};
    use crate::policy::PolicyParams;
    use crate::pomg::run_episode;

    fn pd() -> (MatrixGame, CccPolicies) {
        let c = PolicyParams::constant(5, 2, 0, 50.0).unwrap();
        let d = PolicyParams::constant(5, 2, 1, 50.0).unwrap();
        (MatrixGame::prisoners_dilemma(), CccPolicies::symmetric(c, d))
    }

    #[test]
    fn defection_gain_is_one() {
        let (g, p) = pd();
        let cfg = AmtftConfig { debit_threshold: 5.0, ..AmtftConfig::default() };
        let mut agent = AmtftAgent::<MatrixState>::new(&g, p, cfg, Seat::First, 1).unwrap();
        let mut d = FixedAgent::new(PolicyParams::constant(5, 2, 1, 50.0).unwrap());
        run_episode(&g, &mut agent, &mut d, 1, 0).unwrap();
        assert_eq!(agent.last_gain(), Some(1.0));
        assert_eq!(agent.debit(), 1.0);
    }

    #[test]
    fn punishes_defector_for_multiplier_turns() {
        let (g, p) = pd();
        let mut agent = AmtftAgent::<MatrixState>::new(&g, p, AmtftConfig::default(), Seat::First, 1).unwrap();
        let mut d = FixedAgent::new(PolicyParams::constant(5, 2, 1, 50.0).unwrap());
        let trace = run_episode(&g, &mut agent, &mut d, 23, 0).unwrap();
        // one exploited turn, ten punished turns, repeat
        let modes = agent.modes();
        assert_eq!(modes[0], Mode::Cooperate);
        assert!(modes[1..11].iter().all(|&m| m == Mode::Defect));
        assert_eq!(modes[11], Mode::Cooperate);
        assert_eq!(agent.punishments(), 3);
        assert_eq!(trace.totals(), [20.0, 29.0]);
    }

    #[test]
    fn never_punishes_cooperator() {
        let (g, p) = pd();
        let mut agent = AmtftAgent::<MatrixState>::new(&g, p, AmtftConfig::default(), Seat::Second, 1).unwrap();
        let mut c = FixedAgent::new(PolicyParams::constant(5, 2, 0, 50.0).unwrap());
        run_episode(&g, &mut c, &mut agent, 1000, 0).unwrap();
        assert_eq!(agent.punishments(), 0);
        assert!(agent.modes().iter().all(|&m| m == Mode::Cooperate));
    }

    #[test]
    fn refuses_partially_observed_games() {
        let env = Fishery::new(FisheryConfig::default()).unwrap();
        let pi = PolicyParams::zeros(crate::policy::Architecture::feedforward(75, &[4], 5)).unwrap();
        let p = CccPolicies::symmetric(pi.clone(), pi);
        let err = AmtftAgent::new(&env, p, AmtftConfig::default(), Seat::First, 0).unwrap_err();
        assert_eq!(err, Error::UnsupportedEnvironment("fishery".into()));
    }
}
