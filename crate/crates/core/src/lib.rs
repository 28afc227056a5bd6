//! Consequentialist conditional cooperation for two-player sequential social
//! dilemmas.
//!
//! The crate is `no_std` (with `alloc`) and contains only the pure
//! algorithmic parts of the engine:
//!
//! - [`pomg`]: the partially observed Markov game contract, episode driver and
//!   Monte Carlo rate estimator.
//! - [`env`]: Fishery, Coins, iterated matrix games and the risky-reward wrapper.
//! - [`policy`]: tabular and feedforward softmax policies with exact score
//!   gradients and a versioned checkpoint codec.
//! - [`training`]: REINFORCE self-play under selfish and prosocial reward schemes.
//! - [`agents`]: fixed policies, the CCC threshold agent (plain and hysteresis
//!   rules), precomputed threshold schedules and the rollout-based amTFT baseline.
//! - [`eval`]: analytic Markov-chain rates for matrix games, matchups,
//!   tournaments, strategy metrics and the long-run guarantee suites.
//!
//! File IO, configuration and the command line live in the companion `ccc`
//! crate.

#![no_std]
#![warn(rust_2018_idioms, unused_qualifications)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod agents;
pub mod env;
mod error;
pub mod eval;
pub mod policy;
pub mod pomg;
pub mod rng;
pub mod training;

pub use error::{CheckpointError, Error, Result};
