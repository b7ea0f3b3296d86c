//! Cart-pole balancing with the classic control constants.
//!
//! A pole hinged on a cart slides along a frictionless track; the agent
//! pushes the cart left or right with a fixed-magnitude force and earns +1
//! per step (including the terminating step) until the pole tips past 12
//! degrees, the cart leaves the track, or the episode reaches its step cap.
//! Integration is explicit Euler at 0.02 s: positions advance with the old
//! velocities, then velocities advance with the new accelerations.

use alloc::vec::Vec;
use rand::Rng;

use crate::math::{cos, sin};
use crate::{Error, Result};

const GRAVITY: f64 = 9.8;
const MASS_CART: f64 = 1.0;
const MASS_POLE: f64 = 0.1;
const TOTAL_MASS: f64 = MASS_CART + MASS_POLE;
/// Half the pole length.
const LENGTH: f64 = 0.5;
const POLE_MASS_LENGTH: f64 = MASS_POLE * LENGTH;
const FORCE_MAG: f64 = 10.0;
/// Integration step, seconds.
const TAU: f64 = 0.02;
const X_THRESHOLD: f64 = 2.4;
/// 12 degrees.
const THETA_THRESHOLD: f64 = 12.0 * core::f64::consts::PI / 180.0;
const RESET_SPAN: f64 = 0.05;

/// Cart-pole dynamics plus a step cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cartpole {
    max_steps: u32,
}

impl Default for Cartpole {
    fn default() -> Self {
        Self { max_steps: 200 }
    }
}

/// Position, velocity, pole angle (radians) and angular velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartpoleState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
    steps: u32,
    done: bool,
}

/// Result of one transition.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Observation of the state after the transition.
    pub obs: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

impl Cartpole {
    pub const OBS_DIM: usize = 4;
    pub const ACTIONS: usize = 2;
    /// Nominal per-dimension observation magnitudes, used by whiteout
    /// interference: track limit, a velocity scale, angle limit, an angular
    /// velocity scale.
    pub const NOMINAL_BOUNDS: [f64; 4] = [2.4, 10.0, 0.21, 10.0];

    /// Environment with a custom episode step cap.
    pub fn new(max_steps: u32) -> Result<Self> {
        if max_steps == 0 {
            return Err(Error::InvalidConfig("step cap must be positive"));
        }
        Ok(Self { max_steps })
    }

    pub fn max_steps(&self) -> u32 {
        self.max_steps
    }

    /// Fresh episode: every state component uniform in [-0.05, 0.05].
    pub fn reset<R: Rng>(&self, rng: &mut R) -> CartpoleState {
        let mut draw = || rng.gen_range(-RESET_SPAN..RESET_SPAN);
        CartpoleState {
            x: draw(),
            x_dot: draw(),
            theta: draw(),
            theta_dot: draw(),
            steps: 0,
            done: false,
        }
    }

    /// Advance one step. Action 0 pushes left, 1 pushes right.
    pub fn step(&self, state: &mut CartpoleState, action: usize) -> Result<StepOutcome> {
        if state.done {
            return Err(Error::EpisodeOver);
        }
        if action >= Self::ACTIONS {
            return Err(Error::InvalidConfig("cart-pole action must be 0 or 1"));
        }
        let force = if action == 1 { FORCE_MAG } else { -FORCE_MAG };
        let cos_t = cos(state.theta);
        let sin_t = sin(state.theta);
        let temp =
            (force + POLE_MASS_LENGTH * state.theta_dot * state.theta_dot * sin_t) / TOTAL_MASS;
        let theta_acc = (GRAVITY * sin_t - cos_t * temp)
            / (LENGTH * (4.0 / 3.0 - MASS_POLE * cos_t * cos_t / TOTAL_MASS));
        let x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos_t / TOTAL_MASS;

        state.x += TAU * state.x_dot;
        state.x_dot += TAU * x_acc;
        state.theta += TAU * state.theta_dot;
        state.theta_dot += TAU * theta_acc;
        state.steps += 1;

        let out_of_bounds = state.x < -X_THRESHOLD
            || state.x > X_THRESHOLD
            || state.theta < -THETA_THRESHOLD
            || state.theta > THETA_THRESHOLD;
        state.done = out_of_bounds || state.steps >= self.max_steps;

        Ok(StepOutcome {
            obs: state.observation(),
            reward: 1.0,
            done: state.done,
        })
    }
}

impl CartpoleState {
    /// `[x, x_dot, theta, theta_dot]`.
    pub fn observation(&self) -> Vec<f64> {
        let mut obs = Vec::with_capacity(Cartpole::OBS_DIM);
        obs.extend_from_slice(&[self.x, self.x_dot, self.theta, self.theta_dot]);
        obs
    }

    pub fn done(&self) -> bool {
        self.done
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }
}
