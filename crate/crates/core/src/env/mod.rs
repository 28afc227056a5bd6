//! Concrete games.
//!
//! | game | seats see | actions |
//! |------|-----------|---------|
//! | [`MatrixGame`] | previous joint action (one-hot) + start flag | `C`, `D` (+ optional gift) |
//! | [`Fishery`] | own 5x5 half of the lake, mirrored for seat 2 | up, down, outward, inward, stay |
//! | [`Coins`] | the whole board, seat-relative channels | up, down, left, right, stay |
//!
//! [`Risky`] wraps any of them and makes partner-inflicted penalties rare but large.

mod coins;
mod fishery;
mod matrix;
mod risky;

pub use coins::{Coin, CoinColor, Coins, CoinsConfig, CoinsState};
pub use fishery::{Fish, FishAge, Fishery, FisheryConfig, FisheryState, Tally};
pub use matrix::{MatrixGame, MatrixState};
pub use risky::{PenaltyTrigger, Risky, RiskyRewardConfig, RiskyState};

/// Grid moves shared by the gridworlds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    Up,
    Down,
    Left,
    Right,
    Stay,
}

impl Move {
    pub const COUNT: usize = 5;

    pub fn from_index(i: usize) -> Option<Move> {
        [Move::Up, Move::Down, Move::Left, Move::Right, Move::Stay].get(i).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// (row, column) offset.
    fn delta(self) -> (i32, i32) {
        match self {
            Move::Up => (-1, 0),
            Move::Down => (1, 0),
            Move::Left => (0, -1),
            Move::Right => (0, 1),
            Move::Stay => (0, 0),
        }
    }
}
