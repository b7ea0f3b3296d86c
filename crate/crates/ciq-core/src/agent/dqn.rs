//! Q-learning baselines over stacked observations.
//!
//! One struct covers four behaviors: plain targets, double targets (online
//! argmax, target evaluation), a label-concatenating input variant, and a
//! safe-action variant that replays the last clean action while interfered.
//! The TD loss is the quantile Huber at the median, so gradients stay
//! bounded; the loss/gradient pair is exposed as free functions for
//! finite-difference verification.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use super::replay::ReplayBuffer;
use super::stack::StackedState;
use super::{epsilon_greedy, AgentKind, Hyper, LearnDiag};
use crate::nn::{polyak_update, quantile_huber, quantile_huber_grad, AdamState, Grads, Mlp};
use crate::{Error, Result};

/// One supervised TD sample: a fixed regression target for `Q(input)[action]`.
#[derive(Debug, Clone)]
pub struct BatchItem {
    pub input: Vec<f64>,
    pub action: usize,
    pub target: f64,
    /// Importance weight; 1 under uniform replay.
    pub weight: f64,
}

/// Evaluated batch: loss plus exact gradients.
#[derive(Debug)]
pub struct BatchEval {
    pub loss: f64,
    pub grads: Grads,
    /// Per-item gradient of the batch loss with respect to the item's input.
    pub input_grads: Vec<Vec<f64>>,
    /// Raw TD errors `target - Q(input)[action]`, for priority refreshes.
    pub td_errors: Vec<f64>,
}

/// Bootstrapped regression target for one transition.
///
/// `done` cuts the bootstrap; otherwise the target adds `gamma` times either
/// the best target-network value, or, when `online_next` is given, the
/// target-network value at the online network's argmax.
pub fn td_target(
    reward: f64,
    done: bool,
    gamma: f64,
    target_next: &[f64],
    online_next: Option<&[f64]>,
) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidConfig("gamma must lie in (0, 1)"));
    }
    if done {
        return Ok(reward);
    }
    if target_next.is_empty() {
        return Err(Error::InvalidConfig("empty next-state value vector"));
    }
    let value = match online_next {
        None => target_next.iter().cloned().fold(f64::MIN, f64::max),
        Some(online) => {
            if online.len() != target_next.len() {
                return Err(Error::ShapeMismatch {
                    context: "double target argmax",
                    expected: target_next.len(),
                    got: online.len(),
                });
            }
            target_next[crate::math::argmax(online)]
        }
    };
    Ok(reward + gamma * value)
}

/// Mean weighted quantile-Huber TD loss over a batch, targets held fixed.
pub fn batch_loss(net: &Mlp, items: &[BatchItem], quantile: f64, kappa: f64) -> Result<f64> {
    if items.is_empty() {
        return Err(Error::InvalidConfig("empty training batch"));
    }
    let mut loss = 0.0;
    for item in items {
        let q = net.value(&item.input)?;
        if item.action >= q.len() {
            return Err(Error::ShapeMismatch {
                context: "batch action",
                expected: q.len(),
                got: item.action,
            });
        }
        let u = item.target - q[item.action];
        loss += item.weight * quantile_huber(u, quantile, kappa);
    }
    Ok(loss / items.len() as f64)
}

/// [`batch_loss`] plus exact parameter and input gradients.
pub fn batch_grads(net: &Mlp, items: &[BatchItem], quantile: f64, kappa: f64) -> Result<BatchEval> {
    if items.is_empty() {
        return Err(Error::InvalidConfig("empty training batch"));
    }
    let scale = 1.0 / items.len() as f64;
    let mut grads = Grads::zeros_like(net);
    let mut input_grads = Vec::with_capacity(items.len());
    let mut td_errors = Vec::with_capacity(items.len());
    let mut loss = 0.0;
    for item in items {
        let (q, cache) = net.forward(&item.input)?;
        if item.action >= q.len() {
            return Err(Error::ShapeMismatch {
                context: "batch action",
                expected: q.len(),
                got: item.action,
            });
        }
        let u = item.target - q[item.action];
        loss += item.weight * quantile_huber(u, quantile, kappa);
        // d loss / d Q[a] = -rho'(u), times the item weight and batch mean.
        let mut output_grad = vec![0.0; q.len()];
        output_grad[item.action] =
            -item.weight * scale * quantile_huber_grad(u, quantile, kappa);
        let input_grad = net.backward_into(&cache, &output_grad, &mut grads)?;
        input_grads.push(input_grad);
        td_errors.push(u);
    }
    Ok(BatchEval {
        loss: loss * scale,
        grads,
        input_grads,
        td_errors,
    })
}

/// Per-frame label concatenation: each window slot contributes its
/// observation followed by its label, `m * (obs_dim + 1)` entries total.
pub fn dqn_cf_input(state: &StackedState, labels: &[u8]) -> Result<Vec<f64>> {
    if labels.len() != state.m() {
        return Err(Error::ShapeMismatch {
            context: "label-concat input",
            expected: state.m(),
            got: labels.len(),
        });
    }
    let mut out = Vec::with_capacity(state.m() * (state.obs_dim() + 1));
    for k in 0..state.m() {
        out.extend_from_slice(state.frame(k));
        out.push(f64::from(labels[k]));
    }
    Ok(out)
}

/// Safe-action hold rule: act normally on clean steps and remember the
/// action; replay the remembered action while interfered. With nothing held
/// yet, an interfered step falls back to the fresh action without
/// remembering it.
pub fn safe_action_hold(label: u8, held: Option<usize>, fresh: usize) -> (usize, Option<usize>) {
    match (label, held) {
        (0, _) => (fresh, Some(fresh)),
        (_, Some(h)) => (h, Some(h)),
        (_, None) => (fresh, None),
    }
}

/// Baseline agent: online and target networks over stacked inputs.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    kind: AgentKind,
    online: Mlp,
    target: Mlp,
    adam: AdamState,
    hyper: Hyper,
    m: usize,
    obs_dim: usize,
}

impl DqnAgent {
    /// Fresh agent with `[input, hidden.., actions]` networks. The input is
    /// `m * obs_dim`, plus one label slot per frame for the
    /// label-concatenating kind.
    pub fn new<R: Rng>(
        kind: AgentKind,
        m: usize,
        obs_dim: usize,
        actions: usize,
        hidden: &[usize],
        hyper: Hyper,
        rng: &mut R,
    ) -> Result<Self> {
        if kind == AgentKind::Ciq {
            return Err(Error::InvalidConfig(
                "the switched-head agent has its own constructor",
            ));
        }
        hyper.validate()?;
        if m == 0 || obs_dim == 0 || actions < 2 {
            return Err(Error::InvalidConfig(
                "need a nonempty window and at least two actions",
            ));
        }
        let per_frame = obs_dim + usize::from(kind == AgentKind::DqnCf);
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(m * per_frame);
        sizes.extend_from_slice(hidden);
        sizes.push(actions);
        let online = Mlp::new(&sizes, rng)?;
        let target = online.clone();
        let adam = AdamState::new(&online);
        Ok(Self {
            kind,
            online,
            target,
            adam,
            hyper,
            m,
            obs_dim,
        })
    }

    /// Rebuild from a checkpointed online network; the target starts as a
    /// copy, which only matters when resuming training.
    pub fn from_network(
        kind: AgentKind,
        m: usize,
        obs_dim: usize,
        online: Mlp,
        hyper: Hyper,
    ) -> Result<Self> {
        if kind == AgentKind::Ciq {
            return Err(Error::InvalidConfig(
                "the switched-head agent has its own constructor",
            ));
        }
        hyper.validate()?;
        let per_frame = obs_dim + usize::from(kind == AgentKind::DqnCf);
        if online.input_dim() != m * per_frame {
            return Err(Error::ShapeMismatch {
                context: "agent network input",
                expected: m * per_frame,
                got: online.input_dim(),
            });
        }
        let target = online.clone();
        let adam = AdamState::new(&online);
        Ok(Self {
            kind,
            online,
            target,
            adam,
            hyper,
            m,
            obs_dim,
        })
    }

    pub fn kind(&self) -> AgentKind {
        self.kind
    }

    pub fn actions(&self) -> usize {
        self.online.output_dim()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn hyper(&self) -> &Hyper {
        &self.hyper
    }

    pub fn online(&self) -> &Mlp {
        &self.online
    }

    pub fn target(&self) -> &Mlp {
        &self.target
    }

    /// Network input for a stacked state, using the labels stored in the
    /// state itself (training-time truth).
    pub fn network_input(&self, state: &StackedState) -> Result<Vec<f64>> {
        self.network_input_with_labels(state, state.labels())
    }

    /// Network input with explicit labels, e.g. classifier outputs at test
    /// time. Labels are ignored unless this is the label-concatenating kind.
    pub fn network_input_with_labels(
        &self,
        state: &StackedState,
        labels: &[u8],
    ) -> Result<Vec<f64>> {
        if state.m() != self.m || state.obs_dim() != self.obs_dim {
            return Err(Error::ShapeMismatch {
                context: "agent stacked input",
                expected: self.m * self.obs_dim,
                got: state.frames().len(),
            });
        }
        match self.kind {
            AgentKind::DqnCf => dqn_cf_input(state, labels),
            _ => Ok(state.frames().to_vec()),
        }
    }

    pub fn q_values(&self, state: &StackedState) -> Result<Vec<f64>> {
        self.online.value(&self.network_input(state)?)
    }

    /// Epsilon-greedy action from the online network.
    pub fn act<R: Rng>(&self, state: &StackedState, epsilon: f64, rng: &mut R) -> Result<usize> {
        let q = self.q_values(state)?;
        epsilon_greedy(&q, epsilon, rng)
    }

    /// One gradient step from a sampled batch, followed by the soft target
    /// update. Returns `None` without touching anything when the buffer
    /// cannot fill a batch yet.
    pub fn learn<R: Rng>(
        &mut self,
        buffer: &mut ReplayBuffer,
        rng: &mut R,
    ) -> Result<Option<LearnDiag>> {
        if buffer.len() < self.hyper.batch_size {
            return Ok(None);
        }
        let sample = buffer.sample(self.hyper.batch_size, rng)?;
        let mut items = Vec::with_capacity(sample.indices.len());
        for (&idx, &weight) in sample.indices.iter().zip(&sample.weights) {
            let t = buffer.get(idx);
            let input = self.network_input(&t.state)?;
            let next_input = self.network_input(&t.next_state)?;
            let target_next = self.target.value(&next_input)?;
            let online_next = if self.kind.double_targets() {
                Some(self.online.value(&next_input)?)
            } else {
                None
            };
            let target = td_target(
                t.reward,
                t.done,
                self.hyper.gamma,
                &target_next,
                online_next.as_deref(),
            )?;
            items.push(BatchItem {
                input,
                action: t.action,
                target,
                weight,
            });
        }
        let eval = batch_grads(&self.online, &items, self.hyper.quantile, self.hyper.kappa)?;
        self.adam.step(&mut self.online, &eval.grads, &self.hyper.adam)?;
        polyak_update(&mut self.target, &self.online, self.hyper.tau)?;
        buffer.update_priorities(&sample.indices, &eval.td_errors)?;
        let mean_abs_td = eval.td_errors.iter().map(|u| crate::math::abs(*u)).sum::<f64>()
            / eval.td_errors.len() as f64;
        Ok(Some(LearnDiag {
            loss: eval.loss,
            mean_abs_td,
            bce: 0.0,
        }))
    }
}
