//! Coins: two agents on a shared board collecting colored coins.
//!
//! Seat 1 is red and seat 2 is blue. Any coin is worth +1 to whoever picks it
//! up, but taking a coin of the partner's color costs the partner 2.

use alloc::vec::Vec;

use rand::Rng;

use super::Move;
use crate::pomg::{Environment, GameSpec, Payoffs, Seat, WorldState};
use crate::rng::{rng_from_seed, SimRng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct CoinsConfig {
    pub size: usize,
    pub spawn_prob: f64,
    pub max_coins: usize,
    pub collect_reward: f64,
    /// Charged to the coin's owner when the partner takes it (negative).
    pub steal_penalty: f64,
    pub max_turns: Option<u64>,
}

impl Default for CoinsConfig {
    fn default() -> Self {
        CoinsConfig {
            size: 8,
            spawn_prob: 0.2,
            max_coins: 4,
            collect_reward: 1.0,
            steal_penalty: -2.0,
            max_turns: None,
        }
    }
}

impl CoinsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.size < 2 {
            return Err(Error::invalid("coins.size", "board must be at least 2x2"));
        }
        if !(0.0..=1.0).contains(&self.spawn_prob) {
            return Err(Error::invalid("coins.spawn_prob", "must lie in [0, 1]"));
        }
        if self.max_coins + 2 > self.size * self.size {
            return Err(Error::invalid("coins.max_coins", "too many coins for the board"));
        }
        if !(self.collect_reward.is_finite() && self.steal_penalty.is_finite()) || self.steal_penalty > 0.0 {
            return Err(Error::invalid("coins", "rewards must be finite and the penalty non-positive"));
        }
        Ok(())
    }

    fn observation_len(&self) -> usize {
        4 * self.size * self.size
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoinColor {
    Red,
    Blue,
}

impl CoinColor {
    pub fn of(seat: Seat) -> CoinColor {
        match seat {
            Seat::First => CoinColor::Red,
            Seat::Second => CoinColor::Blue,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Coin {
    pub row: usize,
    pub col: usize,
    pub color: CoinColor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coins {
    cfg: CoinsConfig,
}

impl Coins {
    pub fn new(cfg: CoinsConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Coins { cfg })
    }

    pub fn config(&self) -> &CoinsConfig {
        &self.cfg
    }
}

fn spec_of(cfg: &CoinsConfig) -> GameSpec {
    let (c, p) = (cfg.collect_reward, cfg.steal_penalty);
    GameSpec {
        name: "coins",
        action_counts: [Move::COUNT; 2],
        observation_lengths: [cfg.observation_len(); 2],
        max_episode_length: cfg.max_turns,
        reward_bound: libm::fabs(c).max(libm::fabs(p)).max(libm::fabs(c + p)),
        fully_observed: true,
    }
}

impl Environment for Coins {
    type State = CoinsState;

    fn spec(&self) -> GameSpec {
        spec_of(&self.cfg)
    }

    fn new_state(&self, seed: u64) -> CoinsState {
        let mut rng = rng_from_seed(seed);
        let n = self.cfg.size;
        let agents = [(rng.gen_range(0..n), rng.gen_range(0..n)), (rng.gen_range(0..n), rng.gen_range(0..n))];
        CoinsState { cfg: self.cfg, agents, coins: Vec::new(), rng, turn: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoinsState {
    cfg: CoinsConfig,
    agents: [(usize, usize); 2],
    coins: Vec<Coin>,
    rng: SimRng,
    turn: u64,
}

impl CoinsState {
    pub fn from_parts(cfg: CoinsConfig, agents: [(usize, usize); 2], coins: Vec<Coin>, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.size;
        if agents.iter().any(|&(r, c)| r >= n || c >= n) || coins.iter().any(|c| c.row >= n || c.col >= n) {
            return Err(Error::invalid("coins", "position outside the board"));
        }
        if coins.len() > cfg.max_coins {
            return Err(Error::invalid("coins", "more coins than max_coins"));
        }
        Ok(CoinsState { cfg, agents, coins, rng: rng_from_seed(seed), turn: 0 })
    }

    pub fn agents(&self) -> [(usize, usize); 2] {
        self.agents
    }

    pub fn coins(&self) -> &[Coin] {
        &self.coins
    }

    fn spawn(&mut self) {
        let roll: f64 = self.rng.gen();
        if roll >= self.cfg.spawn_prob || self.coins.len() >= self.cfg.max_coins {
            return;
        }
        let n = self.cfg.size;
        let free: Vec<(usize, usize)> = (0..n * n)
            .map(|i| (i / n, i % n))
            .filter(|&cell| !self.agents.contains(&cell) && !self.coins.iter().any(|c| (c.row, c.col) == cell))
            .collect();
        let color = if self.rng.gen::<bool>() { CoinColor::Red } else { CoinColor::Blue };
        let (row, col) = free[self.rng.gen_range(0..free.len())];
        self.coins.push(Coin { row, col, color });
    }
}

impl WorldState for CoinsState {
    fn spec(&self) -> GameSpec {
        spec_of(&self.cfg)
    }

    fn turn(&self) -> u64 {
        self.turn
    }

    fn observe(&self, seat: Seat, out: &mut [f64]) {
        out.fill(0.0);
        let n = self.cfg.size;
        let cells = n * n;
        let me = self.agents[seat.index()];
        let other = self.agents[seat.other().index()];
        out[me.0 * n + me.1] = 1.0;
        out[cells + other.0 * n + other.1] = 1.0;
        for c in &self.coins {
            let channel = if c.color == CoinColor::of(seat) { 2 } else { 3 };
            out[channel * cells + c.row * n + c.col] = 1.0;
        }
    }

    fn advance(&mut self, actions: [usize; 2]) -> Result<Payoffs> {
        if self.is_terminal() {
            return Err(Error::TerminalState { turn: self.turn });
        }
        spec_of(&self.cfg).check_actions(actions)?;
        let last = self.cfg.size as i32 - 1;
        for (pos, &a) in self.agents.iter_mut().zip(&actions) {
            let (dr, dc) = Move::from_index(a).expect("validated").delta();
            pos.0 = (pos.0 as i32 + dr).clamp(0, last) as usize;
            pos.1 = (pos.1 as i32 + dc).clamp(0, last) as usize;
        }
        let mut payoffs = Payoffs::default();
        let mut i = 0;
        while i < self.coins.len() {
            let coin = self.coins[i];
            let here = self.agents.map(|p| p == (coin.row, coin.col));
            let collector = match here {
                [false, false] => {
                    i += 1;
                    continue;
                }
                [true, false] => Seat::First,
                [false, true] => Seat::Second,
                [true, true] => {
                    if self.rng.gen::<bool>() {
                        Seat::First
                    } else {
                        Seat::Second
                    }
                }
            };
            payoffs.rewards[collector.index()] += self.cfg.collect_reward;
            if coin.color != CoinColor::of(collector) {
                let owner = collector.other().index();
                payoffs.rewards[owner] += self.cfg.steal_penalty;
                payoffs.penalties[owner] += self.cfg.steal_penalty;
            }
            self.coins.swap_remove(i);
        }
        self.spawn();
        self.turn += 1;
        Ok(payoffs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const RIGHT: usize = 3;
    const STAY: usize = 4;

    fn quiet() -> CoinsConfig {
        CoinsConfig { spawn_prob: 0.0, ..CoinsConfig::default() }
    }

    #[test]
    fn own_and_stolen_coins() {
        let red = Coin { row: 0, col: 1, color: CoinColor::Red };
        let mut s = CoinsState::from_parts(quiet(), [(0, 0), (7, 7)], vec![red], 0).unwrap();
        let p = s.advance([RIGHT, STAY]).unwrap();
        assert_eq!(p.rewards, [1.0, 0.0]);
        assert_eq!(p.penalties, [0.0, 0.0]);

        let blue = Coin { color: CoinColor::Blue, ..red };
        let mut s = CoinsState::from_parts(quiet(), [(0, 0), (7, 7)], vec![blue], 0).unwrap();
        let p = s.advance([RIGHT, STAY]).unwrap();
        assert_eq!(p.rewards, [1.0, -2.0]);
        assert_eq!(p.penalties, [0.0, -2.0]);
        assert!(s.coins().is_empty());
    }

    #[test]
    fn empty_board_pays_nothing() {
        let mut s = CoinsState::from_parts(quiet(), [(3, 3), (3, 3)], vec![], 0).unwrap();
        for a in 0..5 {
            assert_eq!(s.advance([a, 4 - a]).unwrap().rewards, [0.0, 0.0]);
        }
    }

    #[test]
    fn simultaneous_arrival_goes_to_one_agent() {
        let mut wins = [0; 2];
        for seed in 0..200 {
            let coin = Coin { row: 0, col: 1, color: CoinColor::Red };
            let mut s = CoinsState::from_parts(quiet(), [(0, 0), (0, 2)], vec![coin], seed).unwrap();
            let p = s.advance([RIGHT, 2]).unwrap();
            if p.rewards == [1.0, 0.0] {
                wins[0] += 1;
            } else {
                assert_eq!(p.rewards, [-2.0, 1.0]);
                wins[1] += 1;
                // blue took red's coin
                assert_eq!(p.penalties, [-2.0, 0.0]);
            }
        }
        assert!(wins[0] > 60 && wins[1] > 60, "{wins:?}");
    }

    #[test]
    fn observation_is_seat_relative() {
        let coins = vec![Coin { row: 1, col: 1, color: CoinColor::Red }];
        let s = CoinsState::from_parts(quiet(), [(0, 0), (2, 2)], coins, 0).unwrap();
        let mut o1 = vec![0.0; 256];
        let mut o2 = vec![0.0; 256];
        s.observe(Seat::First, &mut o1);
        s.observe(Seat::Second, &mut o2);
        assert_eq!(o1[0], 1.0);
        assert_eq!(o1[64 + 18], 1.0);
        assert_eq!(o1[128 + 9], 1.0);
        assert_eq!(o2[18], 1.0);
        assert_eq!(o2[64], 1.0);
        assert_eq!(o2[192 + 9], 1.0);
    }

    #[test]
    fn spawns_stay_on_empty_cells_under_cap() {
        let cfg = CoinsConfig { spawn_prob: 1.0, ..CoinsConfig::default() };
        let mut s = Coins::new(cfg).unwrap().new_state(9);
        for t in 0..100 {
            s.advance([t % 5, (t * 3) % 5]).unwrap();
            assert!(s.coins().len() <= 4);
            for (i, c) in s.coins().iter().enumerate() {
                assert!(s.coins()[i + 1..].iter().all(|d| (d.row, d.col) != (c.row, c.col)));
            }
        }
    }
}
