//! Fishery: a common-pool game on a lake split between two players.
//!
//! The lake is `rows x 2*half_width`. Seat 1 owns columns `0..half_width`,
//! seat 2 the rest, and each player sees and moves only within its own half.
//! Young fish appear on a player's outer column and swim one column per turn
//! toward the far shore; a fish that crosses the midline becomes mature.
//! Catching a young fish is worth 1, a mature one 3, so leaving young fish
//! alone feeds the partner.
//!
//! Each turn runs: move agents, resolve catches, move fish, spawn.
//!
//! Seat 2's observation and actions are mirrored left-right, so both seats see
//! their outer shore at local column 0 and one policy can play either side.

use alloc::vec::Vec;

use rand::Rng;

use super::Move;
use crate::pomg::{Environment, GameSpec, Payoffs, Seat, WorldState};
use crate::rng::{rng_from_seed, SimRng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct FisheryConfig {
    pub rows: usize,
    pub half_width: usize,
    /// Chance per turn that each side spawns a young fish.
    pub spawn_prob: f64,
    /// Cap on live fish originating from one side.
    pub max_fish_per_side: usize,
    pub young_reward: f64,
    pub mature_reward: f64,
    pub max_turns: Option<u64>,
}

impl Default for FisheryConfig {
    fn default() -> Self {
        FisheryConfig {
            rows: 5,
            half_width: 5,
            spawn_prob: 0.25,
            max_fish_per_side: 6,
            young_reward: 1.0,
            mature_reward: 3.0,
            max_turns: None,
        }
    }
}

impl FisheryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.half_width == 0 {
            return Err(Error::invalid("fishery", "grid dimensions must be positive"));
        }
        if !(0.0..=1.0).contains(&self.spawn_prob) {
            return Err(Error::invalid("fishery.spawn_prob", "must lie in [0, 1]"));
        }
        if !(self.young_reward.is_finite() && self.mature_reward.is_finite()) {
            return Err(Error::invalid("fishery", "rewards must be finite"));
        }
        Ok(())
    }

    fn width(&self) -> usize {
        2 * self.half_width
    }

    fn observation_len(&self) -> usize {
        3 * self.rows * self.half_width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FishAge {
    Young,
    Mature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fish {
    pub row: usize,
    pub col: usize,
    pub age: FishAge,
    /// Side whose outer column spawned the fish; it swims away from there.
    pub origin: Seat,
}

/// The Fishery environment.
#[derive(Debug, Clone, PartialEq)]
pub struct Fishery {
    cfg: FisheryConfig,
}

impl Fishery {
    pub fn new(cfg: FisheryConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Fishery { cfg })
    }

    pub fn config(&self) -> &FisheryConfig {
        &self.cfg
    }
}

impl Environment for Fishery {
    type State = FisheryState;

    fn spec(&self) -> GameSpec {
        spec_of(&self.cfg)
    }

    fn new_state(&self, seed: u64) -> FisheryState {
        let mut rng = rng_from_seed(seed);
        let cfg = self.cfg;
        let mut agents = [(0, 0); 2];
        for seat in Seat::BOTH {
            let row = rng.gen_range(0..cfg.rows);
            let local = rng.gen_range(0..cfg.half_width);
            agents[seat.index()] = (row, global_col(&cfg, seat, local));
        }
        FisheryState { cfg, agents, fish: Vec::new(), rng, turn: 0, tally: Tally::default() }
    }
}

fn spec_of(cfg: &FisheryConfig) -> GameSpec {
    GameSpec {
        name: "fishery",
        action_counts: [Move::COUNT; 2],
        observation_lengths: [cfg.observation_len(); 2],
        max_episode_length: cfg.max_turns,
        // at most one fish per origin can share a cell
        reward_bound: libm::fabs(cfg.young_reward) + libm::fabs(cfg.mature_reward),
        fully_observed: false,
    }
}

fn global_col(cfg: &FisheryConfig, seat: Seat, local: usize) -> usize {
    match seat {
        Seat::First => local,
        Seat::Second => cfg.width() - 1 - local,
    }
}

fn local_col(cfg: &FisheryConfig, seat: Seat, col: usize) -> Option<usize> {
    match seat {
        Seat::First => (col < cfg.half_width).then_some(col),
        Seat::Second => (col >= cfg.half_width).then(|| cfg.width() - 1 - col),
    }
}

/// Bookkeeping for the conservation invariant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Tally {
    pub spawned: u64,
    pub consumed: u64,
    pub despawned: u64,
    pub value_extracted: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FisheryState {
    cfg: FisheryConfig,
    /// Global (row, column) of each agent.
    agents: [(usize, usize); 2],
    fish: Vec<Fish>,
    rng: SimRng,
    turn: u64,
    tally: Tally,
}

impl FisheryState {
    /// Builds an arbitrary state; agents must sit inside their own halves.
    pub fn from_parts(
        cfg: FisheryConfig,
        agents: [(usize, usize); 2],
        fish: Vec<Fish>,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        for seat in Seat::BOTH {
            let (row, col) = agents[seat.index()];
            if row >= cfg.rows || local_col(&cfg, seat, col).is_none() {
                return Err(Error::invalid("agents", "agent outside its own half"));
            }
        }
        if fish.iter().any(|f| f.row >= cfg.rows || f.col >= cfg.width()) {
            return Err(Error::invalid("fish", "fish outside the lake"));
        }
        let tally = Tally { spawned: fish.len() as u64, ..Tally::default() };
        Ok(FisheryState { cfg, agents, fish, rng: rng_from_seed(seed), turn: 0, tally })
    }

    pub fn agents(&self) -> [(usize, usize); 2] {
        self.agents
    }

    pub fn fish(&self) -> &[Fish] {
        &self.fish
    }

    pub fn tally(&self) -> Tally {
        self.tally
    }

    pub fn config(&self) -> &FisheryConfig {
        &self.cfg
    }

    fn move_agent(&mut self, seat: Seat, action: usize) {
        // moves are in the seat's mirrored frame, so work in local columns
        let (dr, dc) = Move::from_index(action).expect("validated").delta();
        let (row, col) = self.agents[seat.index()];
        let local = local_col(&self.cfg, seat, col).expect("agent in own half") as i32;
        let new_local = (local + dc).clamp(0, self.cfg.half_width as i32 - 1) as usize;
        let new_row = (row as i32 + dr).clamp(0, self.cfg.rows as i32 - 1) as usize;
        self.agents[seat.index()] = (new_row, global_col(&self.cfg, seat, new_local));
    }

    fn catch_fish(&mut self) -> [f64; 2] {
        let mut rewards = [0.0; 2];
        let (cfg, agents) = (self.cfg, self.agents);
        let tally = &mut self.tally;
        self.fish.retain(|f| {
            for seat in Seat::BOTH {
                if agents[seat.index()] == (f.row, f.col) {
                    let value = match f.age {
                        FishAge::Young => cfg.young_reward,
                        FishAge::Mature => cfg.mature_reward,
                    };
                    rewards[seat.index()] += value;
                    tally.consumed += 1;
                    tally.value_extracted += value;
                    return false;
                }
            }
            true
        });
        rewards
    }

    fn swim(&mut self) {
        let (half, width) = (self.cfg.half_width, self.cfg.width());
        let tally = &mut self.tally;
        self.fish.retain_mut(|f| {
            let next = match f.origin {
                Seat::First => f.col + 1,
                Seat::Second => match f.col.checked_sub(1) {
                    Some(c) => c,
                    None => {
                        tally.despawned += 1;
                        return false;
                    }
                },
            };
            if next >= width {
                tally.despawned += 1;
                return false;
            }
            let crossed = match f.origin {
                Seat::First => f.col < half && next >= half,
                Seat::Second => f.col >= half && next < half,
            };
            if crossed {
                f.age = FishAge::Mature;
            }
            f.col = next;
            true
        });
    }

    fn spawn(&mut self) {
        for side in Seat::BOTH {
            let roll: f64 = self.rng.gen();
            if roll >= self.cfg.spawn_prob {
                continue;
            }
            if self.fish.iter().filter(|f| f.origin == side).count() >= self.cfg.max_fish_per_side {
                continue;
            }
            let col = global_col(&self.cfg, side, 0);
            let free: Vec<usize> =
                (0..self.cfg.rows).filter(|&r| !self.fish.iter().any(|f| f.row == r && f.col == col)).collect();
            if free.is_empty() {
                continue;
            }
            let row = free[self.rng.gen_range(0..free.len())];
            self.fish.push(Fish { row, col, age: FishAge::Young, origin: side });
            self.tally.spawned += 1;
        }
    }
}

impl WorldState for FisheryState {
    fn spec(&self) -> GameSpec {
        spec_of(&self.cfg)
    }

    fn turn(&self) -> u64 {
        self.turn
    }

    fn observe(&self, seat: Seat, out: &mut [f64]) {
        out.fill(0.0);
        let cells = self.cfg.rows * self.cfg.half_width;
        let index = |row: usize, local: usize| row * self.cfg.half_width + local;
        let (row, col) = self.agents[seat.index()];
        out[index(row, local_col(&self.cfg, seat, col).expect("agent in own half"))] = 1.0;
        for f in &self.fish {
            if let Some(local) = local_col(&self.cfg, seat, f.col) {
                let channel = match f.age {
                    FishAge::Young => 1,
                    FishAge::Mature => 2,
                };
                out[channel * cells + index(f.row, local)] = 1.0;
            }
        }
    }

    fn advance(&mut self, actions: [usize; 2]) -> Result<Payoffs> {
        if self.is_terminal() {
            return Err(Error::TerminalState { turn: self.turn });
        }
        spec_of(&self.cfg).check_actions(actions)?;
        self.move_agent(Seat::First, actions[0]);
        self.move_agent(Seat::Second, actions[1]);
        let rewards = self.catch_fish();
        self.swim();
        self.spawn();
        self.turn += 1;
        Ok(Payoffs { rewards, penalties: [0.0; 2] })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const UP: usize = 0;
    const LEFT: usize = 2;
    const RIGHT: usize = 3;
    const STAY: usize = 4;

    fn quiet() -> FisheryConfig {
        FisheryConfig { spawn_prob: 0.0, ..FisheryConfig::default() }
    }

    fn young(row: usize, col: usize, origin: Seat) -> Fish {
        Fish { row, col, age: FishAge::Young, origin }
    }

    #[test]
    fn catching_young_and_mature_fish() {
        let fish = vec![young(2, 3, Seat::First)];
        let mut s = FisheryState::from_parts(quiet(), [(2, 2), (0, 9)], fish, 0).unwrap();
        let p = s.advance([RIGHT, STAY]).unwrap();
        assert_eq!(p.rewards, [1.0, 0.0]);

        let mature = Fish { row: 1, col: 1, age: FishAge::Mature, origin: Seat::Second };
        let mut s = FisheryState::from_parts(quiet(), [(2, 1), (0, 9)], vec![mature], 0).unwrap();
        assert_eq!(s.advance([UP, STAY]).unwrap().rewards, [3.0, 0.0]);
    }

    #[test]
    fn nothing_nearby_pays_nothing() {
        let mut s = FisheryState::from_parts(quiet(), [(0, 0), (4, 9)], vec![], 0).unwrap();
        assert_eq!(s.advance([STAY, STAY]).unwrap().rewards, [0.0, 0.0]);
    }

    #[test]
    fn fish_mature_on_crossing_midline() {
        let fish = vec![young(0, 4, Seat::First), young(4, 5, Seat::Second), young(2, 2, Seat::First)];
        let mut s = FisheryState::from_parts(quiet(), [(3, 0), (3, 9)], fish, 0).unwrap();
        s.advance([STAY, STAY]).unwrap();
        let f = s.fish();
        assert_eq!((f[0].col, f[0].age), (5, FishAge::Mature));
        assert_eq!((f[1].col, f[1].age), (4, FishAge::Mature));
        assert_eq!((f[2].col, f[2].age), (3, FishAge::Young));
    }

    #[test]
    fn agents_clamp_to_their_half() {
        let mut s = FisheryState::from_parts(quiet(), [(0, 4), (0, 5)], vec![], 0).unwrap();
        // seat 1 "right" points inward, seat 2 "right" (mirrored) too
        s.advance([RIGHT, RIGHT]).unwrap();
        assert_eq!(s.agents(), [(0, 4), (0, 5)]);
        s.advance([LEFT, LEFT]).unwrap();
        assert_eq!(s.agents(), [(0, 3), (0, 6)]);
        s.advance([UP, UP]).unwrap();
        assert_eq!(s.agents(), [(0, 3), (0, 6)]);
    }

    #[test]
    fn fish_leave_at_far_edge() {
        let mature = Fish { row: 0, col: 9, age: FishAge::Mature, origin: Seat::First };
        let mut s = FisheryState::from_parts(quiet(), [(4, 0), (4, 5)], vec![mature], 0).unwrap();
        s.advance([STAY, STAY]).unwrap();
        assert!(s.fish().is_empty());
        assert_eq!(s.tally().despawned, 1);
    }

    #[test]
    fn mirrored_observation() {
        let fish = vec![young(1, 9, Seat::Second), young(1, 0, Seat::First)];
        let s = FisheryState::from_parts(quiet(), [(0, 0), (0, 9)], fish, 0).unwrap();
        let mut o1 = vec![0.0; 75];
        let mut o2 = vec![0.0; 75];
        s.observe(Seat::First, &mut o1);
        s.observe(Seat::Second, &mut o2);
        assert_eq!(o1, o2);
    }

    #[test]
    fn spawning_respects_cap() {
        let cfg = FisheryConfig { spawn_prob: 1.0, max_fish_per_side: 2, ..FisheryConfig::default() };
        let mut s = Fishery::new(cfg).unwrap().new_state(5);
        for _ in 0..20 {
            s.advance([STAY, STAY]).unwrap();
            for side in Seat::BOTH {
                assert!(s.fish().iter().filter(|f| f.origin == side).count() <= 2);
            }
        }
    }
}
