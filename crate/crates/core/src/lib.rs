//! Solvers and simulators for stopping games on finite Markov chains.
//!
//! - [`simple_game`]: coalition families and the aggregation of stop votes.
//! - [`markov`]: finite chains, one-step expectations, seeded simulation.
//! - [`voting_game`]: the p-player voting stopping game, finite and
//!   infinite horizon, plus exact profile evaluation and deviation checks.
//! - [`dynkin`]: the zero-sum Dynkin game with randomized stopping.
//! - [`disorder`]: Bayesian change-point detection with a detection window.
//! - [`sensor_net`]: detectors fused by a simple game into one stopping game.

pub mod disorder;
pub mod dynkin;
pub mod markov;
pub mod rng;
pub mod sensor_net;
pub mod simple_game;
pub mod voting_game;

pub use markov::{MarkovChain, StateFunction};
pub use simple_game::{Coalition, SimpleGame, VoteVector};
pub use voting_game::{GameSpec, Horizon};
