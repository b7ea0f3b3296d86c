//! Agents: frame stacking, replay, DQN variants and the switched-head agent.
//!
//! Everything here is deterministic given the caller's RNG streams. Agents
//! never touch an environment directly; the run loop feeds them stacked
//! observations and transitions, and they hand back actions and gradient
//! steps.

pub mod ciq;
pub mod classifier;
pub mod dqn;
pub mod replay;
pub mod stack;

use alloc::format;
use alloc::string::String;
use rand::Rng;

use crate::nn::AdamHyper;
use crate::{Error, Result};

pub use ciq::{CiqAgent, CiqNets, CiqQView, EvalDecision, LabelMode};
pub use classifier::{classify, train_aux_classifier, ClassifierReport};
pub use dqn::{dqn_cf_input, safe_action_hold, td_target, DqnAgent};
pub use replay::{ReplayBuffer, SampleBatch, Transition};
pub use stack::{FrameStack, StackedState};

/// Which agent a run trains. `DqnCf` concatenates per-frame labels to the
/// input, `DqnSa` holds the last clean action while interfered, `Ciq` routes
/// through switched Q-heads over encoded latents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentKind {
    Dqn,
    Ddqn,
    DqnCf,
    DqnSa,
    Ciq,
}

impl AgentKind {
    pub const ALL: [AgentKind; 5] = [
        AgentKind::Dqn,
        AgentKind::Ddqn,
        AgentKind::DqnCf,
        AgentKind::DqnSa,
        AgentKind::Ciq,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AgentKind::Dqn => "dqn",
            AgentKind::Ddqn => "ddqn",
            AgentKind::DqnCf => "dqn_cf",
            AgentKind::DqnSa => "dqn_sa",
            AgentKind::Ciq => "ciq",
        }
    }

    /// Double targets: online argmax, target evaluation.
    pub fn double_targets(&self) -> bool {
        matches!(self, AgentKind::Ddqn)
    }
}

impl core::str::FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgentKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or(Error::InvalidConfig(
                "agent kind must be one of dqn, ddqn, dqn_cf, dqn_sa, ciq",
            ))
    }
}

impl core::fmt::Display for AgentKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// House training hyperparameters shared by every agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyper {
    pub gamma: f64,
    pub adam: AdamHyper,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Polyak coefficient for the per-step soft target update.
    pub tau: f64,
    /// Weight of the label-head cross-entropy term in the joint loss.
    pub lambda: f64,
    /// Huber transition point of the TD loss.
    pub kappa: f64,
    /// Quantile level of the TD loss; 0.5 keeps it symmetric.
    pub quantile: f64,
    pub prioritized: bool,
    pub priority_alpha: f64,
    pub priority_beta: f64,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            adam: AdamHyper::default(),
            batch_size: 32,
            buffer_capacity: 100_000,
            tau: 5e-3,
            lambda: 1.0,
            kappa: 1.0,
            quantile: 0.5,
            prioritized: false,
            priority_alpha: 0.6,
            priority_beta: 0.4,
        }
    }
}

impl Hyper {
    pub fn validate(&self) -> Result<()> {
        self.adam.validate()?;
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidConfig("gamma must lie in (0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be nonzero"));
        }
        if self.buffer_capacity < self.batch_size {
            return Err(Error::InvalidConfig("buffer must hold at least one batch"));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::InvalidConfig("tau must lie in (0, 1]"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig("lambda must be finite and nonnegative"));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidConfig("kappa must be finite and positive"));
        }
        if !(self.quantile > 0.0 && self.quantile < 1.0) {
            return Err(Error::InvalidConfig("quantile must lie in (0, 1)"));
        }
        if !(self.priority_alpha >= 0.0 && self.priority_beta >= 0.0) {
            return Err(Error::InvalidConfig("priority exponents must be nonnegative"));
        }
        Ok(())
    }

    /// Build this configuration's replay buffer.
    pub fn replay_buffer(&self) -> Result<ReplayBuffer> {
        if self.prioritized {
            ReplayBuffer::prioritized(
                self.buffer_capacity,
                self.priority_alpha,
                self.priority_beta,
            )
        } else {
            ReplayBuffer::uniform(self.buffer_capacity)
        }
    }
}

/// Exploration schedule: multiplicative decay per episode with a floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub decay: f64,
    pub floor: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            start: 1.0,
            decay: 0.995,
            floor: 0.01,
        }
    }
}

impl EpsilonSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| (0.0..=1.0).contains(&v);
        if !(ok(self.start) && ok(self.decay) && ok(self.floor)) {
            return Err(Error::InvalidConfig(
                "epsilon schedule fields must lie in [0, 1]",
            ));
        }
        Ok(())
    }

    /// Exploration rate for a 0-based training episode index.
    pub fn at(&self, episode: usize) -> f64 {
        let v = self.start * crate::math::powf(self.decay, episode as f64);
        if v < self.floor {
            self.floor
        } else {
            v
        }
    }
}

/// Diagnostics from one gradient step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnDiag {
    pub loss: f64,
    pub mean_abs_td: f64,
    /// Label-head cross entropy; zero for agents without one.
    pub bce: f64,
}

/// Epsilon-greedy selection over a Q-vector. Greedy ties break to the lowest
/// action index; no randomness is consumed when `epsilon` is exactly 0.
pub fn epsilon_greedy<R: Rng>(q: &[f64], epsilon: f64, rng: &mut R) -> Result<usize> {
    if q.is_empty() {
        return Err(Error::InvalidConfig("empty action-value vector"));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidConfig("epsilon must lie in [0, 1]"));
    }
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        return Ok(rng.gen_range(0..q.len()));
    }
    Ok(crate::math::argmax(q))
}

/// Threshold a label probability; the 0.5 tie resolves to interfered.
pub fn hard_label(p: f64) -> u8 {
    if p >= 0.5 {
        1
    } else {
        0
    }
}

/// Checkpoint manifest helper: the network roles a serialized agent carries,
/// in file order.
pub fn network_roles(kind: AgentKind) -> &'static [&'static str] {
    match kind {
        AgentKind::Ciq => &["encoder", "label_head", "head_interfered", "head_clean"],
        _ => &["online"],
    }
}

/// Human-readable architecture summary, e.g. `4x4 -> [32, 32] -> 2`.
pub fn describe_sizes(sizes: &[usize]) -> String {
    format!("{sizes:?}")
}
