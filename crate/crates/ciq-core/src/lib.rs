//! Q-learning under abrupt observational interference.
//!
//! The crate trains value-based agents whose observations are intermittently
//! replaced by an interference generator (noise, adversarial perturbation,
//! blackout, whiteout, frozen frames) and audits the resulting policies with
//! causal and robustness metrics.
//!
//! Everything here is deterministic given a seed: all randomness flows
//! through caller-supplied [`rand_chacha::ChaCha8Rng`] streams, floating
//! point is `f64` throughout, and transcendental functions are routed
//! through `libm` so results do not depend on the platform's libm.
//!
//! The crate is `no_std` (with `alloc`); file formats, configuration and
//! the command line live in the companion `ciq-cli` crate.
//!
//! Module map:
//! - [`nn`]: minimal dense networks with exact gradients, Adam, Polyak
//!   averaging and the quantile Huber loss.
//! - [`env`]: cart-pole dynamics and a two-armed contextual bandit.
//! - [`interference`]: label processes and observation generators.
//! - [`agent`]: replay, frame stacking, DQN variants and the
//!   switched-head causal-inference agent.
//! - [`metrics`]: episode recordings, action-consistency rate,
//!   gradient-based robustness certificates and treatment-effect
//!   estimation with refutation tests.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod agent;
pub mod env;
mod error;
pub mod interference;
pub mod math;
pub mod metrics;
pub mod nn;
pub mod rng;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;
