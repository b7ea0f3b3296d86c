//! Robustness and causal-effect measurement over paired evaluation traces.
//!
//! Everything here consumes [`EpisodeRecording`]s: per-step pairs of the
//! clean observation and what the agent actually saw, with both greedy
//! actions and both Q-vectors. The action-match rate reads them directly,
//! the treatment-effect estimator works from the recorded Q maxima and
//! label probabilities, and the local-robustness certificate replays the
//! clean states through any Q-function.

mod ate;
mod clever;

pub use ate::{
    apply_intervention_noise, ate, ite, refute, AteReport, RefuteMode, RefuteParams,
};
pub use clever::{
    clever_q, fit_reverse_weibull_location, margin, sample_in_ball, verify_theorem1,
    CleverConfig, LipschitzEstimator, PNorm,
};

use alloc::vec::Vec;

use crate::agent::FrameStack;
use crate::{Error, Result};

/// One evaluation step: what the environment produced, what the agent saw,
/// and how the agent reacted to each.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// Clean observation.
    pub clean: Vec<f64>,
    /// Delivered (possibly interfered) observation.
    pub noisy: Vec<f64>,
    /// True interference label of the step.
    pub label: u8,
    /// The agent's estimated interference probability (or the configured
    /// rate for agents without an estimate).
    pub p_est: f64,
    /// Greedy action on the delivered observation.
    pub action_noisy: usize,
    /// Greedy action the agent would have taken on the clean observation.
    pub action_clean: usize,
    /// Q-vector on the clean input.
    pub q_clean: Vec<f64>,
    /// Q-vector on the delivered input.
    pub q_noisy: Vec<f64>,
}

/// A full evaluation episode of [`StepRecord`]s.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeRecording {
    pub steps: Vec<StepRecord>,
}

impl EpisodeRecording {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Structural checks: consistent dimensions, binary labels,
    /// probabilities in range.
    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.steps.first() else {
            return Err(Error::EmptyRecording);
        };
        let obs_dim = first.clean.len();
        let actions = first.q_clean.len();
        for step in &self.steps {
            if step.clean.len() != obs_dim || step.noisy.len() != obs_dim {
                return Err(Error::ShapeMismatch {
                    context: "recording observation",
                    expected: obs_dim,
                    got: step.noisy.len(),
                });
            }
            if step.q_clean.len() != actions || step.q_noisy.len() != actions {
                return Err(Error::ShapeMismatch {
                    context: "recording Q-vector",
                    expected: actions,
                    got: step.q_noisy.len(),
                });
            }
            if step.label > 1 {
                return Err(Error::Malformed("recording label is not binary"));
            }
            if !(0.0..=1.0).contains(&step.p_est) {
                return Err(Error::Malformed("recording probability out of range"));
            }
            if step.action_noisy >= actions || step.action_clean >= actions {
                return Err(Error::Malformed("recorded action out of range"));
            }
        }
        Ok(())
    }
}

/// Fraction of steps where the action on the delivered input matches the
/// action on the clean input.
pub fn ac_rate(recording: &EpisodeRecording) -> Result<f64> {
    if recording.is_empty() {
        return Err(Error::EmptyRecording);
    }
    let matches = recording
        .steps
        .iter()
        .filter(|s| s.action_noisy == s.action_clean)
        .count();
    Ok(matches as f64 / recording.len() as f64)
}

/// Mean per-episode action-match rate.
pub fn ac_rate_mean(recordings: &[EpisodeRecording]) -> Result<f64> {
    if recordings.is_empty() {
        return Err(Error::EmptyRecording);
    }
    let mut sum = 0.0;
    for r in recordings {
        sum += ac_rate(r)?;
    }
    Ok(sum / recordings.len() as f64)
}

/// Rebuild the per-step stacked network inputs an agent saw during an
/// episode: sliding windows of `m` frames, zero-padded at the start, over
/// either the clean or the delivered observations.
pub fn stacked_inputs(
    recording: &EpisodeRecording,
    m: usize,
    use_clean: bool,
) -> Result<Vec<Vec<f64>>> {
    let Some(first) = recording.steps.first() else {
        return Err(Error::EmptyRecording);
    };
    let mut stack = FrameStack::new(m, first.clean.len())?;
    let mut out = Vec::with_capacity(recording.len());
    for step in &recording.steps {
        let frame = if use_clean { &step.clean } else { &step.noisy };
        stack.push(frame, step.label)?;
        out.push(stack.state().frames().to_vec());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    pub(crate) fn step(
        q_clean: Vec<f64>,
        q_noisy: Vec<f64>,
        p_est: f64,
        label: u8,
    ) -> StepRecord {
        let action_clean = crate::math::argmax(&q_clean);
        let action_noisy = crate::math::argmax(&q_noisy);
        StepRecord {
            clean: vec![0.1, 0.2],
            noisy: vec![0.1, 0.2],
            label,
            p_est,
            action_noisy,
            action_clean,
            q_clean,
            q_noisy,
        }
    }

    #[test]
    fn ac_rate_counts_matching_actions() {
        let rec = EpisodeRecording {
            steps: vec![
                step(vec![1.0, 0.0], vec![1.0, 0.0], 0.0, 0),
                step(vec![1.0, 0.0], vec![0.0, 1.0], 0.0, 1),
                step(vec![0.0, 1.0], vec![0.0, 1.0], 0.0, 0),
                step(vec![0.0, 1.0], vec![1.0, 0.0], 0.0, 1),
            ],
        };
        assert_eq!(ac_rate(&rec).unwrap(), 0.5);
        let all_match = EpisodeRecording {
            steps: vec![step(vec![2.0, 1.0], vec![3.0, 0.0], 0.0, 0)],
        };
        assert_eq!(ac_rate(&all_match).unwrap(), 1.0);
        assert!(ac_rate(&EpisodeRecording::default()).is_err());
    }

    #[test]
    fn ac_rate_is_invariant_under_consistent_action_relabeling() {
        let rec = EpisodeRecording {
            steps: vec![
                step(vec![1.0, 0.0], vec![0.0, 1.0], 0.0, 1),
                step(vec![0.0, 1.0], vec![0.0, 1.0], 0.0, 0),
            ],
        };
        // Swap both action spaces consistently: indices 0 and 1 trade
        // places in every Q-vector, so every argmax flips but matches are
        // preserved.
        let swapped = EpisodeRecording {
            steps: rec
                .steps
                .iter()
                .map(|s| {
                    step(
                        vec![s.q_clean[1], s.q_clean[0]],
                        vec![s.q_noisy[1], s.q_noisy[0]],
                        s.p_est,
                        s.label,
                    )
                })
                .collect(),
        };
        assert_eq!(ac_rate(&rec).unwrap(), ac_rate(&swapped).unwrap());
    }

    #[test]
    fn mean_ac_rate_averages_episodes() {
        let full = EpisodeRecording {
            steps: vec![step(vec![1.0, 0.0], vec![1.0, 0.0], 0.0, 0)],
        };
        let none = EpisodeRecording {
            steps: vec![step(vec![1.0, 0.0], vec![0.0, 1.0], 0.0, 1)],
        };
        let mean = ac_rate_mean(&[full, none]).unwrap();
        assert_eq!(mean, 0.5);
    }

    #[test]
    fn validate_rejects_malformed_recordings() {
        let mut rec = EpisodeRecording {
            steps: vec![step(vec![1.0, 0.0], vec![1.0, 0.0], 0.0, 0)],
        };
        rec.validate().unwrap();
        rec.steps[0].label = 2;
        assert!(rec.validate().is_err());
        rec.steps[0].label = 0;
        rec.steps[0].p_est = 1.5;
        assert!(rec.validate().is_err());
        rec.steps[0].p_est = 0.5;
        rec.steps[0].q_noisy = vec![1.0];
        assert!(rec.validate().is_err());
        assert!(EpisodeRecording::default().validate().is_err());
    }

    #[test]
    fn stacked_inputs_replay_the_frame_window() {
        let mut rec = EpisodeRecording::default();
        for k in 0..3 {
            let v = k as f64;
            let mut s = step(vec![1.0, 0.0], vec![1.0, 0.0], 0.0, 0);
            s.clean = vec![v, v];
            s.noisy = vec![v + 10.0, v + 10.0];
            rec.steps.push(s);
        }
        let clean = stacked_inputs(&rec, 2, true).unwrap();
        assert_eq!(clean[0], vec![0.0, 0.0, 0.0, 0.0]);
        assert_eq!(clean[1], vec![0.0, 0.0, 1.0, 1.0]);
        assert_eq!(clean[2], vec![1.0, 1.0, 2.0, 2.0]);
        let noisy = stacked_inputs(&rec, 2, false).unwrap();
        assert_eq!(noisy[2], vec![11.0, 11.0, 12.0, 12.0]);
    }
}
