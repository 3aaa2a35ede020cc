//! Hierarchical multi-agent air combat.
//!
//! The crate is layered bottom-up:
//!
//! - [`geometry`]: compass headings and the angular metrics (ATA, aspect
//!   angle, angle-off) used everywhere else.
//! - [`sim`]: the fixed-step combat simulator (kinematics, cannon cones,
//!   homing rockets, boundary kills).
//! - [`env`]: scenario generation, observation vectors, action decoding,
//!   rewards and episode outcomes for fight, escape and commander policies.
//! - [`scripted`]: rule-based curriculum opponents.
//! - [`nn`]: a small actor-critic stack with hand-written backprop
//!   (self-attention, GRU, shared layers) and Adam.
//! - [`train`]: PPO, the curriculum/league, escape and commander training.
//! - [`eval`]: evaluation reports, scenario sweeps and trajectory export.
//! - [`cli`]: the command-line front end used by the `dogfight` binary.

pub mod cli;
pub mod env;
pub mod eval;
pub mod geometry;
pub mod nn;
pub mod scripted;
pub mod sim;
pub mod train;
