//! Risky rewards: partner-inflicted penalties become rare but large.
//!
//! A triggering penalty `v` is replaced by `v / p` with probability `p` and by
//! nothing otherwise, so its expectation is unchanged while a consequentialist
//! observer needs many more turns to notice it.

use rand::Rng;

use crate::pomg::{Environment, GameSpec, Payoffs, Seat, WorldState};
use crate::rng::{derive_seed, rng_from_seed, SimRng};
use crate::{Error, Result};

/// Which part of a turn's reward counts as a penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PenaltyTrigger {
    /// The share of the reward caused by the partner's move, as reported by the base game.
    #[default]
    PartnerInflicted,
    /// Any negative reward, taken whole.
    NegativeReward,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RiskyRewardConfig {
    pub p: f64,
    pub trigger: PenaltyTrigger,
}

impl RiskyRewardConfig {
    pub fn new(p: f64) -> Result<Self> {
        let cfg = RiskyRewardConfig { p, trigger: PenaltyTrigger::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        // written to reject NaN as well
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::invalid("risky.p", "must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Replaces the triggering part of each seat's reward.
    fn transform(&self, payoffs: Payoffs, rng: &mut SimRng) -> Payoffs {
        if self.p == 1.0 {
            return payoffs;
        }
        let mut out = payoffs;
        for seat in Seat::BOTH {
            let i = seat.index();
            let v = match self.trigger {
                PenaltyTrigger::PartnerInflicted => payoffs.penalties[i].min(0.0),
                PenaltyTrigger::NegativeReward => payoffs.rewards[i].min(0.0),
            };
            if v == 0.0 {
                continue;
            }
            let hit = rng.gen::<f64>() < self.p;
            let delivered = if hit { v / self.p } else { 0.0 };
            out.rewards[i] = payoffs.rewards[i] - v + delivered;
            out.penalties[i] = delivered;
        }
        out
    }
}

/// Wraps a base game with [`RiskyRewardConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct Risky<E> {
    base: E,
    cfg: RiskyRewardConfig,
}

/// Stream index for the wrapper's own draws, kept apart from the base game's.
const RISK_STREAM: u64 = 0x5249_534b;

impl<E: Environment> Risky<E> {
    pub fn new(base: E, cfg: RiskyRewardConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Risky { base, cfg })
    }

    pub fn base(&self) -> &E {
        &self.base
    }

    pub fn config(&self) -> &RiskyRewardConfig {
        &self.cfg
    }
}

fn wrap_spec(base: GameSpec, cfg: &RiskyRewardConfig) -> GameSpec {
    if cfg.p == 1.0 {
        return base;
    }
    // a penalty is at most the spread of two rewards
    let r = base.reward_bound;
    GameSpec { reward_bound: r + 2.0 * r * (1.0 + 1.0 / cfg.p), ..base }
}

impl<E: Environment> Environment for Risky<E> {
    type State = RiskyState<E::State>;

    fn spec(&self) -> GameSpec {
        wrap_spec(self.base.spec(), &self.cfg)
    }

    fn new_state(&self, seed: u64) -> Self::State {
        RiskyState {
            base: self.base.new_state(seed),
            cfg: self.cfg,
            rng: rng_from_seed(derive_seed(seed, RISK_STREAM)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskyState<S> {
    base: S,
    cfg: RiskyRewardConfig,
    rng: SimRng,
}

impl<S> RiskyState<S> {
    pub fn base(&self) -> &S {
        &self.base
    }
}

impl<S: WorldState> WorldState for RiskyState<S> {
    fn spec(&self) -> GameSpec {
        wrap_spec(self.base.spec(), &self.cfg)
    }

    fn turn(&self) -> u64 {
        self.base.turn()
    }

    fn is_terminal(&self) -> bool {
        self.base.is_terminal()
    }

    fn observe(&self, seat: Seat, out: &mut [f64]) {
        self.base.observe(seat, out);
    }

    fn advance(&mut self, actions: [usize; 2]) -> Result<Payoffs> {
        let payoffs = self.base.advance(actions)?;
        Ok(self.cfg.transform(payoffs, &mut self.rng))
    }
}
