//! Sliding observation window fed to every agent.
//!
//! Observations arrive one frame at a time; agents consume the `m` most
//! recent frames flattened oldest-first, zero-padded at episode start.
//! Each frame carries the interference label it was delivered under, so a
//! stacked state is self-describing: label-aware agents read the window
//! without any side channel.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// A flattened window of the `m` most recent observations plus their labels.
///
/// Slot `k` (oldest first) holds frame `k` at `frames[k*obs_dim..(k+1)*obs_dim]`
/// and its label at `labels[k]`. The first `m - valid` slots are zero padding
/// with label 0.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedState {
    frames: Vec<f64>,
    labels: Vec<u8>,
    valid: usize,
}

impl StackedState {
    /// Assemble a window from explicit parts; mostly useful in tests and
    /// when replaying recordings.
    pub fn from_parts(frames: Vec<f64>, labels: Vec<u8>, valid: usize) -> Result<Self> {
        let m = labels.len();
        if m == 0 || frames.len() % m != 0 || frames.is_empty() {
            return Err(Error::ShapeMismatch {
                context: "stacked state frames",
                expected: m,
                got: frames.len(),
            });
        }
        if valid > m {
            return Err(Error::InvalidConfig("valid frame count exceeds window"));
        }
        Ok(Self {
            frames,
            labels,
            valid,
        })
    }

    /// All frames flattened oldest-first: the network input for plain stacks.
    pub fn frames(&self) -> &[f64] {
        &self.frames
    }

    /// Per-frame labels, oldest first; padding slots carry 0.
    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Window length `m`.
    pub fn m(&self) -> usize {
        self.labels.len()
    }

    pub fn obs_dim(&self) -> usize {
        self.frames.len() / self.m()
    }

    /// Number of real (non-padding) frames, at most `m`.
    pub fn valid(&self) -> usize {
        self.valid
    }

    /// The newest frame.
    pub fn current_frame(&self) -> &[f64] {
        let d = self.obs_dim();
        &self.frames[self.frames.len() - d..]
    }

    /// Label the newest frame was delivered under.
    pub fn current_label(&self) -> u8 {
        self.labels[self.labels.len() - 1]
    }

    /// True when slot `k` is zero padding rather than a delivered frame.
    pub fn is_padding(&self, k: usize) -> bool {
        k < self.m() - self.valid
    }

    /// Frame `k` of the window, oldest first.
    pub fn frame(&self, k: usize) -> &[f64] {
        let d = self.obs_dim();
        &self.frames[k * d..(k + 1) * d]
    }
}

/// Incremental builder for [`StackedState`] windows over an episode.
#[derive(Debug, Clone)]
pub struct FrameStack {
    m: usize,
    obs_dim: usize,
    frames: Vec<f64>,
    labels: Vec<u8>,
    valid: usize,
}

impl FrameStack {
    pub fn new(m: usize, obs_dim: usize) -> Result<Self> {
        if m == 0 || obs_dim == 0 {
            return Err(Error::InvalidConfig(
                "frame stack needs nonzero window and observation size",
            ));
        }
        Ok(Self {
            m,
            obs_dim,
            frames: vec![0.0; m * obs_dim],
            labels: vec![0; m],
            valid: 0,
        })
    }

    /// Clear to the all-padding state at the start of an episode.
    pub fn reset(&mut self) {
        self.frames.fill(0.0);
        self.labels.fill(0);
        self.valid = 0;
    }

    /// Shift the window one slot and append the newest frame with its label.
    pub fn push(&mut self, obs: &[f64], label: u8) -> Result<()> {
        if obs.len() != self.obs_dim {
            return Err(Error::ShapeMismatch {
                context: "frame stack push",
                expected: self.obs_dim,
                got: obs.len(),
            });
        }
        self.frames.copy_within(self.obs_dim.., 0);
        let tail = self.frames.len() - self.obs_dim;
        self.frames[tail..].copy_from_slice(obs);
        self.labels.copy_within(1.., 0);
        self.labels[self.m - 1] = label;
        if self.valid < self.m {
            self.valid += 1;
        }
        Ok(())
    }

    /// Snapshot of the current window.
    pub fn state(&self) -> StackedState {
        StackedState {
            frames: self.frames.clone(),
            labels: self.labels.clone(),
            valid: self.valid,
        }
    }

    /// The frames that will precede a yet-to-arrive observation, flattened:
    /// the current window minus its oldest slot. A gradient-sign attack on
    /// the next observation runs against `[prefix, candidate]`.
    pub fn attack_prefix(&self) -> Vec<f64> {
        self.frames[self.obs_dim..].to_vec()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }
}
