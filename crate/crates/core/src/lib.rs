//! Space-bounded strategies for the (a,b)-mirror game.
//!
//! * [`engine`] referees games between bounded-memory strategies and
//!   measures their state after every transition.
//! * [`strategies`] holds the mirror, oracle-backed and adversarial strategies.
//! * [`streamrec`] recovers the numbers missing from a stream using power sums.
//! * [`setfam`] checks, bounds and searches Oddtown/Eventown, Modtown,
//!   covering and matching-vector families.
//! * [`harness`] runs seeded Monte Carlo experiments, enumerates occurring
//!   sets and profiles memory; [`cli`] wires everything to the command line.

pub mod cli;
pub mod engine;
pub mod harness;
pub mod setfam;
pub mod strategies;
pub mod streamrec;

pub use engine::{
    measure_state, replay, run_game, run_game_observed, EngineError, GameConfig, Outcome, Player,
    Strategy, Transcript,
};
pub use streamrec::{
    elementary_from_power, recover_missing, select_prime, PowerSumSketch, PrimeField,
};
