//! Iterated matrix games.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::pomg::{Environment, GameSpec, Payoffs, Seat, WorldState};
use crate::{Error, Result};

/// A repeated simultaneous-move game given by a payoff table.
///
/// Action 0 is cooperate and action 1 is defect; the `C`/`D` sub-table must be
/// a prisoner's dilemma for both players (`DC > CC > DD > CD` and
/// `2 CC > DC + CD`). Extra actions (e.g. a costly gift) are unconstrained.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGame {
    actions: usize,
    /// `payoffs[a1 * actions + a2]`.
    payoffs: Arc<[[f64; 2]]>,
    max_turns: Option<u64>,
}

impl MatrixGame {
    pub const COOPERATE: usize = 0;
    pub const DEFECT: usize = 1;
    pub const GIFT: usize = 2;

    /// Builds a game from `table[a1][a2] = [r1, r2]`.
    pub fn new(table: &[Vec<[f64; 2]>]) -> Result<Self> {
        let actions = table.len();
        if actions < 2 || table.iter().any(|row| row.len() != actions) {
            return Err(Error::invalid("payoffs", "payoff table must be square with at least C and D"));
        }
        let payoffs: Vec<[f64; 2]> = table.iter().flatten().copied().collect();
        if payoffs.iter().flatten().any(|r| !r.is_finite()) {
            return Err(Error::invalid("payoffs", "payoffs must be finite"));
        }
        let game = MatrixGame { actions, payoffs: payoffs.into(), max_turns: None };
        let (c, d) = (Self::COOPERATE, Self::DEFECT);
        for seat in Seat::BOTH {
            let own = |mine: usize, theirs: usize| match seat {
                Seat::First => game.payoff(mine, theirs)[0],
                Seat::Second => game.payoff(theirs, mine)[1],
            };
            let (dc, cc, dd, cd) = (own(d, c), own(c, c), own(d, d), own(c, d));
            if !(dc > cc && cc > dd && dd > cd) {
                return Err(Error::invalid(
                    "payoffs",
                    format!("seat {seat:?} violates DC > CC > DD > CD: {dc}, {cc}, {dd}, {cd}"),
                ));
            }
            if 2.0 * cc <= dc + cd {
                return Err(Error::invalid("payoffs", format!("seat {seat:?} violates 2CC > DC + CD")));
            }
        }
        Ok(game)
    }

    /// CC = (2, 2), CD = (0, 3), DC = (3, 0), DD = (1, 1).
    pub fn prisoners_dilemma() -> Self {
        Self::from_symmetric(2.0, 0.0, 3.0, 1.0).expect("canonical table is a dilemma")
    }

    /// Symmetric game from the row player's `CC`, `CD`, `DC`, `DD` payoffs.
    pub fn from_symmetric(cc: f64, cd: f64, dc: f64, dd: f64) -> Result<Self> {
        Self::new(&[alloc::vec![[cc, cc], [cd, dc]], alloc::vec![[dc, cd], [dd, dd]]])
    }

    /// Adds a third action, a gift: it plays like cooperation, costs the giver
    /// `cost` and hands the partner `value` on top of the base payoff.
    pub fn with_gift(&self, cost: f64, value: f64) -> Result<Self> {
        if self.actions != 2 {
            return Err(Error::invalid("payoffs", "gift variant needs a 2-action base game"));
        }
        let base = |a: usize| if a == Self::GIFT { Self::COOPERATE } else { a };
        let table: Vec<Vec<[f64; 2]>> = (0..3)
            .map(|a1| {
                (0..3)
                    .map(|a2| {
                        let mut r = self.payoff(base(a1), base(a2));
                        if a1 == Self::GIFT {
                            r[0] -= cost;
                            r[1] += value;
                        }
                        if a2 == Self::GIFT {
                            r[1] -= cost;
                            r[0] += value;
                        }
                        r
                    })
                    .collect()
            })
            .collect();
        let mut game = Self::new(&table)?;
        game.max_turns = self.max_turns;
        Ok(game)
    }

    pub fn with_max_turns(mut self, max_turns: Option<u64>) -> Self {
        self.max_turns = max_turns;
        self
    }

    pub fn action_count(&self) -> usize {
        self.actions
    }

    pub fn payoff(&self, a1: usize, a2: usize) -> [f64; 2] {
        self.payoffs[a1 * self.actions + a2]
    }

    /// Rewards for one joint move.
    pub fn matrix_step(&self, a1: usize, a2: usize) -> Result<[f64; 2]> {
        self.game_spec().check_actions([a1, a2])?;
        Ok(self.payoff(a1, a2))
    }

    pub fn table(&self) -> Vec<Vec<[f64; 2]>> {
        (0..self.actions).map(|a1| (0..self.actions).map(|a2| self.payoff(a1, a2)).collect()).collect()
    }

    /// Length of the one-hot observation: every joint action plus a start flag.
    pub fn observation_len(&self) -> usize {
        self.actions * self.actions + 1
    }

    /// Feature index for `seat` after joint action `previous` (`None` at the start).
    pub fn observation_index(&self, seat: Seat, previous: Option<[usize; 2]>) -> usize {
        match previous {
            None => self.actions * self.actions,
            Some([a1, a2]) => match seat {
                Seat::First => a1 * self.actions + a2,
                Seat::Second => a2 * self.actions + a1,
            },
        }
    }

    fn game_spec(&self) -> GameSpec {
        let bound = self.payoffs.iter().flatten().fold(0.0f64, |m, r| m.max(libm::fabs(*r)));
        GameSpec {
            name: "matrix",
            action_counts: [self.actions; 2],
            observation_lengths: [self.observation_len(); 2],
            max_episode_length: self.max_turns,
            reward_bound: bound,
            fully_observed: true,
        }
    }

    /// Rewards plus the partner-inflicted share: the shortfall against what
    /// the same own action would have earned had the partner cooperated.
    fn payoffs_for(&self, a1: usize, a2: usize) -> Payoffs {
        let rewards = self.payoff(a1, a2);
        let penalties = [
            (rewards[0] - self.payoff(a1, Self::COOPERATE)[0]).min(0.0),
            (rewards[1] - self.payoff(Self::COOPERATE, a2)[1]).min(0.0),
        ];
        Payoffs { rewards, penalties }
    }
}

impl Environment for MatrixGame {
    type State = MatrixState;

    fn spec(&self) -> GameSpec {
        self.game_spec()
    }

    fn new_state(&self, _seed: u64) -> MatrixState {
        MatrixState { game: self.clone(), previous: None, turn: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixState {
    game: MatrixGame,
    previous: Option<[usize; 2]>,
    turn: u64,
}

impl MatrixState {
    pub fn game(&self) -> &MatrixGame {
        &self.game
    }

    pub fn previous(&self) -> Option<[usize; 2]> {
        self.previous
    }
}

impl WorldState for MatrixState {
    fn spec(&self) -> GameSpec {
        self.game.game_spec()
    }

    fn turn(&self) -> u64 {
        self.turn
    }

    fn observe(&self, seat: Seat, out: &mut [f64]) {
        out.fill(0.0);
        out[self.game.observation_index(seat, self.previous)] = 1.0;
    }

    fn advance(&mut self, actions: [usize; 2]) -> Result<Payoffs> {
        if self.is_terminal() {
            return Err(Error::TerminalState { turn: self.turn });
        }
        self.game.game_spec().check_actions(actions)?;
        self.previous = Some(actions);
        self.turn += 1;
        Ok(self.game.payoffs_for(actions[0], actions[1]))
    }
}
