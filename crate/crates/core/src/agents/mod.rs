//! Test-time strategies.
//!
//! [`FixedAgent`] plays a policy unconditionally. [`CccAgent`] switches between
//! a cooperative and a defecting policy by comparing its own cumulative reward
//! with thresholds from self-play rollouts. [`AmtftAgent`] keeps a debit of the
//! partner's estimated gains from deviating and punishes when it grows too big.

mod amtft;
mod ccc;
mod schedule;

use alloc::vec::Vec;

pub use amtft::{AmtftAgent, AmtftConfig};
pub use ccc::{BankStats, CccAgent, CccConfig, DecisionRule, RolloutBanks};
pub use schedule::{precompute_thresholds, Provenance, ThresholdSchedule};

use crate::policy::{sample_index, PolicyParams, Workspace};
use crate::pomg::{Agent, Seat, WorldState};
use crate::rng::SimRng;
use crate::{Error, Result};

/// Which policy a conditional agent is currently following.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Mode {
    Cooperate,
    Defect,
}

/// Plays one policy no matter what happens.
#[derive(Debug, Clone)]
pub struct FixedAgent {
    policy: PolicyParams,
    ws: Workspace,
}

impl FixedAgent {
    pub fn new(policy: PolicyParams) -> Self {
        FixedAgent { policy, ws: Workspace::default() }
    }

    pub fn policy(&self) -> &PolicyParams {
        &self.policy
    }
}

impl<S: WorldState> Agent<S> for FixedAgent {
    fn act(&mut self, obs: &[f64], rng: &mut SimRng) -> Result<usize> {
        let probs = self.policy.forward_into(obs, &mut self.ws)?;
        Ok(sample_index(probs, rng))
    }

    fn observe(&mut self, _reward: f64) -> Result<()> {
        Ok(())
    }
}

/// Policies a conditional agent needs: its own cooperative and defecting
/// policies and models of a cooperative and a defecting partner.
#[derive(Debug, Clone, PartialEq)]
pub struct CccPolicies {
    pub own_c: PolicyParams,
    pub own_d: PolicyParams,
    pub partner_c: PolicyParams,
    pub partner_d: PolicyParams,
}

impl CccPolicies {
    /// The same pair of policies on both sides.
    pub fn symmetric(pi_c: PolicyParams, pi_d: PolicyParams) -> Self {
        CccPolicies { own_c: pi_c.clone(), own_d: pi_d.clone(), partner_c: pi_c, partner_d: pi_d }
    }

    fn validate<S: WorldState>(&self, state: &S, seat: Seat) -> Result<()> {
        let spec = state.spec();
        let check = |p: &PolicyParams, s: Seat| -> Result<()> {
            let (inputs, actions) = (spec.observation_lengths[s.index()], spec.action_counts[s.index()]);
            if p.architecture().input_len() != inputs || p.action_count() != actions {
                return Err(Error::invalid("policies", "policy shape does not fit the game"));
            }
            Ok(())
        };
        check(&self.own_c, seat)?;
        check(&self.own_d, seat)?;
        check(&self.partner_c, seat.other())?;
        check(&self.partner_d, seat.other())
    }
}

/// Scratch buffers for stepping simulated games.
#[derive(Debug, Clone, Default)]
pub(crate) struct Simulator {
    ws: Workspace,
    obs: Vec<f64>,
}

impl Simulator {
    /// Samples a joint action with `policies[seat]` playing each seat.
    pub(crate) fn joint_action<S: WorldState>(
        &mut self,
        state: &S,
        policies: [&PolicyParams; 2],
        rng: &mut SimRng,
    ) -> Result<[usize; 2]> {
        let mut actions = [0; 2];
        for seat in Seat::BOTH {
            let i = seat.index();
            self.obs.clear();
            self.obs.resize(state.spec().observation_lengths[i], 0.0);
            state.observe(seat, &mut self.obs);
            let probs = policies[i].forward_into(&self.obs, &mut self.ws)?;
            actions[i] = sample_index(probs, rng);
        }
        Ok(actions)
    }

    /// Most probable action of `policy` for `seat` in `state`.
    pub(crate) fn greedy_action<S: WorldState>(
        &mut self,
        state: &S,
        seat: Seat,
        policy: &PolicyParams,
    ) -> Result<usize> {
        self.obs.clear();
        self.obs.resize(state.spec().observation_lengths[seat.index()], 0.0);
        state.observe(seat, &mut self.obs);
        let probs = policy.forward_into(&self.obs, &mut self.ws)?;
        Ok(crate::policy::argmax(probs))
    }

    /// Plays `turns` more turns and returns the rewards collected per seat.
    pub(crate) fn roll<S: WorldState>(
        &mut self,
        state: &mut S,
        policies: [&PolicyParams; 2],
        turns: usize,
        rng: &mut SimRng,
    ) -> Result<[f64; 2]> {
        let mut total = [0.0; 2];
        for _ in 0..turns {
            if state.is_terminal() {
                break;
            }
            let actions = self.joint_action(state, policies, rng)?;
            let p = state.advance(actions)?;
            total[0] += p.rewards[0];
            total[1] += p.rewards[1];
        }
        Ok(total)
    }
}

/// Orders `(own, partner)` into seat order.
pub(crate) fn seated<T>(seat: Seat, own: T, partner: T) -> [T; 2] {
    match seat {
        Seat::First => [own, partner],
        Seat::Second => [partner, own],
    }
}

/// Tracks the act/observe alternation every agent must follow.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Protocol {
    awaiting_observe: bool,
}

impl Protocol {
    pub(crate) fn on_act(&mut self) -> Result<()> {
        if self.awaiting_observe {
            return Err(Error::Protocol("act called again before observe"));
        }
        self.awaiting_observe = true;
        Ok(())
    }

    pub(crate) fn on_observe(&mut self) -> Result<()> {
        if !self.awaiting_observe {
            return Err(Error::Protocol("observe called without a preceding act"));
        }
        self.awaiting_observe = false;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::env::{MatrixGame, MatrixState};
    use crate::rng::rng_from_seed;

    #[test]
    fn fixed_agent_follows_its_policy() {
        let pi = PolicyParams::tabular(&vec![vec![0.0, 0.0]; 5]).unwrap();
        let mut agent = FixedAgent::new(pi);
        let mut rng = rng_from_seed(1);
        let obs = [0.0, 0.0, 0.0, 0.0, 1.0];
        let n = 4000;
        let mut ones = 0;
        for _ in 0..n {
            ones += Agent::<MatrixState>::act(&mut agent, &obs, &mut rng).unwrap();
            Agent::<MatrixState>::observe(&mut agent, -1e9).unwrap();
        }
        assert!((ones as f64 / n as f64 - 0.5).abs() < 0.03);
    }

    #[test]
    fn simulator_rolls_deterministic_policies() {
        let g = MatrixGame::prisoners_dilemma();
        let c = PolicyParams::constant(5, 2, 0, 50.0).unwrap();
        let d = PolicyParams::constant(5, 2, 1, 50.0).unwrap();
        let mut s = crate::pomg::Environment::new_state(&g, 0);
        let mut sim = Simulator::default();
        let total = sim.roll(&mut s, [&c, &d], 10, &mut rng_from_seed(0)).unwrap();
        assert_eq!(total, [0.0, 30.0]);
        assert_eq!(seated(Seat::Second, 1, 2), [2, 1]);
    }
}
