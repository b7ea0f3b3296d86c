//! Switched-head Q-agent over encoded latents.
//!
//! Four networks cooperate: a per-frame encoder producing a latent `z`, a
//! label head predicting the interference probability from `z`, and two
//! Q-heads over the windowed causal state `[(z_k, i_k); m]` - one trained
//! exclusively on interfered steps, one on clean steps. During training the
//! true labels fill the window and pick the head; during evaluation the
//! label head's own predictions do.
//!
//! The joint loss per transition is
//! `TD(selected head) + lambda * BCE(label head, true label)`,
//! both terms backpropagating into the encoder. Gradients are exact and are
//! verified against central finite differences in the tests.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use super::replay::ReplayBuffer;
use super::stack::StackedState;
use super::{epsilon_greedy, hard_label, Hyper, LearnDiag};
use crate::math::sigmoid;
use crate::nn::{
    bce_with_logits, bce_with_logits_grad, polyak_update, quantile_huber, quantile_huber_grad,
    AdamState, ForwardCache, Grads, Mlp, QFunction,
};
use crate::{Error, Result};

/// How predicted labels are materialized at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelMode {
    /// Bernoulli draw from the predicted probability (default).
    Sampled,
    /// Deterministic threshold at 0.5, ties to interfered.
    Hard,
    /// The probability itself fills the window; the switch still thresholds.
    Soft,
}

/// The four online networks.
///
/// Dimensions: encoder `[obs, .., latent]` (its output gets an extra ReLU,
/// applied here, so the latent is nonnegative), label head `[latent, .., 1]`
/// (logit output), both Q-heads `[m * (latent + 1), .., actions]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CiqNets {
    pub encoder: Mlp,
    pub label_head: Mlp,
    /// Selected when the switch label is 1.
    pub head_interfered: Mlp,
    /// Selected when the switch label is 0.
    pub head_clean: Mlp,
}

impl CiqNets {
    pub fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn obs_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn actions(&self) -> usize {
        self.head_clean.output_dim()
    }

    /// Window length implied by the Q-head input width.
    pub fn m(&self) -> usize {
        self.head_clean.input_dim() / (self.latent_dim() + 1)
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.latent_dim();
        if self.label_head.input_dim() != l {
            return Err(Error::ShapeMismatch {
                context: "label head input",
                expected: l,
                got: self.label_head.input_dim(),
            });
        }
        if self.label_head.output_dim() != 1 {
            return Err(Error::ShapeMismatch {
                context: "label head output",
                expected: 1,
                got: self.label_head.output_dim(),
            });
        }
        let head_in = self.head_clean.input_dim();
        if self.head_interfered.input_dim() != head_in
            || self.head_interfered.output_dim() != self.head_clean.output_dim()
        {
            return Err(Error::ShapeMismatch {
                context: "paired Q-heads",
                expected: head_in,
                got: self.head_interfered.input_dim(),
            });
        }
        if head_in % (l + 1) != 0 || head_in == 0 {
            return Err(Error::ShapeMismatch {
                context: "Q-head window width",
                expected: l + 1,
                got: head_in,
            });
        }
        if self.actions() < 2 {
            return Err(Error::InvalidConfig("need at least two actions"));
        }
        Ok(())
    }

    /// Encoded latent for one frame, final ReLU applied.
    pub fn encode(&self, frame: &[f64]) -> Result<Vec<f64>> {
        let mut z = self.encoder.value(frame)?;
        for v in &mut z {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok(z)
    }

    /// Label-head probability for an encoded latent.
    pub fn label_probability(&self, latent: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.label_head.value(latent)?[0]))
    }

    /// Causal state: the window of `(latent, label)` pairs flattened oldest
    /// first. Padding slots stay all-zero pairs; real frames are encoded.
    pub fn causal_state(&self, state: &StackedState, labels: &[f64]) -> Result<Vec<f64>> {
        if labels.len() != state.m() {
            return Err(Error::ShapeMismatch {
                context: "causal state labels",
                expected: state.m(),
                got: labels.len(),
            });
        }
        let l = self.latent_dim();
        let mut s_ci = Vec::with_capacity(state.m() * (l + 1));
        for k in 0..state.m() {
            if state.is_padding(k) {
                s_ci.extend(core::iter::repeat(0.0).take(l + 1));
            } else {
                s_ci.extend_from_slice(&self.encode(state.frame(k))?);
                s_ci.push(labels[k]);
            }
        }
        Ok(s_ci)
    }

    /// Q-values through the head selected by the switch bit.
    pub fn q_switched(&self, s_ci: &[f64], switch: u8) -> Result<Vec<f64>> {
        let head = if switch == 1 {
            &self.head_interfered
        } else {
            &self.head_clean
        };
        head.value(s_ci)
    }
}

/// Gradients for all four networks, shaped like their owners.
#[derive(Debug)]
pub struct CiqGrads {
    pub encoder: Grads,
    pub label_head: Grads,
    pub head_interfered: Grads,
    pub head_clean: Grads,
}

impl CiqGrads {
    pub fn zeros_like(nets: &CiqNets) -> Self {
        Self {
            encoder: Grads::zeros_like(&nets.encoder),
            label_head: Grads::zeros_like(&nets.label_head),
            head_interfered: Grads::zeros_like(&nets.head_interfered),
            head_clean: Grads::zeros_like(&nets.head_clean),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.encoder.scale(factor);
        self.label_head.scale(factor);
        self.head_interfered.scale(factor);
        self.head_clean.scale(factor);
    }
}

/// One training sample: a state with its stored labels, the taken action,
/// and a fixed bootstrapped target.
#[derive(Debug, Clone)]
pub struct CiqBatchItem<'a> {
    pub state: &'a StackedState,
    pub action: usize,
    pub target: f64,
    pub weight: f64,
}

/// Evaluated batch.
#[derive(Debug)]
pub struct CiqEval {
    pub loss: f64,
    pub td_loss: f64,
    pub bce: f64,
    pub grads: CiqGrads,
    /// Per-item gradient of the batch loss with respect to the raw stacked
    /// frames (`m * obs_dim` entries; padding slots are zero).
    pub input_grads: Vec<Vec<f64>>,
    pub td_errors: Vec<f64>,
}

fn window_labels(state: &StackedState) -> Vec<f64> {
    state.labels().iter().map(|&b| f64::from(b)).collect()
}

/// Forward pass of one frame with caches kept for backprop.
struct EncodedFrame {
    /// Raw encoder output, before the extra output ReLU.
    raw: Vec<f64>,
    cache: ForwardCache,
}

impl EncodedFrame {
    fn latent(&self) -> Vec<f64> {
        self.raw
            .iter()
            .map(|&v| if v < 0.0 { 0.0 } else { v })
            .collect()
    }

    /// Zero `grad` wherever the output ReLU was inactive.
    fn mask(&self, grad: &mut [f64]) {
        for (g, &raw) in grad.iter_mut().zip(&self.raw) {
            if raw <= 0.0 {
                *g = 0.0;
            }
        }
    }
}

/// Joint loss over a batch, targets held fixed: mean of
/// `weight * (TD + lambda * BCE)`. Pure recomputation used by the
/// finite-difference oracle; [`ciq_grads`] must agree with it exactly.
pub fn ciq_loss(
    nets: &CiqNets,
    items: &[CiqBatchItem<'_>],
    lambda: f64,
    quantile: f64,
    kappa: f64,
) -> Result<f64> {
    let (td, bce) = ciq_loss_parts(nets, items, quantile, kappa)?;
    Ok(td + lambda * bce)
}

/// The two addends of the joint loss, already batch-averaged.
pub fn ciq_loss_parts(
    nets: &CiqNets,
    items: &[CiqBatchItem<'_>],
    quantile: f64,
    kappa: f64,
) -> Result<(f64, f64)> {
    if items.is_empty() {
        return Err(Error::InvalidConfig("empty training batch"));
    }
    let mut td_sum = 0.0;
    let mut bce_sum = 0.0;
    for item in items {
        if item.state.valid() == 0 {
            return Err(Error::Uninitialized("stacked state has no frames"));
        }
        let labels = window_labels(item.state);
        let s_ci = nets.causal_state(item.state, &labels)?;
        let q = nets.q_switched(&s_ci, item.state.current_label())?;
        if item.action >= q.len() {
            return Err(Error::ShapeMismatch {
                context: "batch action",
                expected: q.len(),
                got: item.action,
            });
        }
        let u = item.target - q[item.action];
        td_sum += item.weight * quantile_huber(u, quantile, kappa);
        let latent = nets.encode(item.state.current_frame())?;
        let logit = nets.label_head.value(&latent)?[0];
        bce_sum += item.weight * bce_with_logits(logit, f64::from(item.state.current_label()));
    }
    let n = items.len() as f64;
    Ok((td_sum / n, bce_sum / n))
}

/// Exact gradients of [`ciq_loss`] for every network, plus input gradients.
pub fn ciq_grads(
    nets: &CiqNets,
    items: &[CiqBatchItem<'_>],
    lambda: f64,
    quantile: f64,
    kappa: f64,
) -> Result<CiqEval> {
    if items.is_empty() {
        return Err(Error::InvalidConfig("empty training batch"));
    }
    let scale = 1.0 / items.len() as f64;
    let l = nets.latent_dim();
    let mut grads = CiqGrads::zeros_like(nets);
    let mut input_grads = Vec::with_capacity(items.len());
    let mut td_errors = Vec::with_capacity(items.len());
    let mut td_sum = 0.0;
    let mut bce_sum = 0.0;
    for item in items {
        let state = item.state;
        if state.valid() == 0 {
            return Err(Error::Uninitialized("stacked state has no frames"));
        }
        let m = state.m();
        let obs_dim = state.obs_dim();
        // Encode every real frame once, keeping caches.
        let mut encoded: Vec<Option<EncodedFrame>> = Vec::with_capacity(m);
        let mut s_ci = Vec::with_capacity(m * (l + 1));
        for k in 0..m {
            if state.is_padding(k) {
                encoded.push(None);
                s_ci.extend(core::iter::repeat(0.0).take(l + 1));
            } else {
                let (raw, cache) = nets.encoder.forward(state.frame(k))?;
                let frame = EncodedFrame { raw, cache };
                s_ci.extend_from_slice(&frame.latent());
                s_ci.push(f64::from(state.labels()[k]));
                encoded.push(Some(frame));
            }
        }
        // TD term through the selected head.
        let switch = state.current_label();
        let head = if switch == 1 {
            &nets.head_interfered
        } else {
            &nets.head_clean
        };
        let head_grads = if switch == 1 {
            &mut grads.head_interfered
        } else {
            &mut grads.head_clean
        };
        let (q, head_cache) = head.forward(&s_ci)?;
        if item.action >= q.len() {
            return Err(Error::ShapeMismatch {
                context: "batch action",
                expected: q.len(),
                got: item.action,
            });
        }
        let u = item.target - q[item.action];
        td_sum += item.weight * quantile_huber(u, quantile, kappa);
        td_errors.push(u);
        let mut head_out_grad = vec![0.0; q.len()];
        head_out_grad[item.action] =
            -item.weight * scale * quantile_huber_grad(u, quantile, kappa);
        let s_ci_grad = head.backward_into(&head_cache, &head_out_grad, head_grads)?;
        // Per-frame latent gradients from the TD path.
        let mut latent_grads: Vec<Vec<f64>> = (0..m)
            .map(|k| s_ci_grad[k * (l + 1)..k * (l + 1) + l].to_vec())
            .collect();
        // BCE term on the current frame's latent.
        let cur = m - 1;
        let cur_frame = encoded[cur]
            .as_ref()
            .expect("current frame is never padding once valid > 0");
        let latent = cur_frame.latent();
        let (logit_out, lh_cache) = nets.label_head.forward(&latent)?;
        let label = f64::from(switch);
        bce_sum += item.weight * bce_with_logits(logit_out[0], label);
        let dlogit = lambda * item.weight * scale * bce_with_logits_grad(logit_out[0], label);
        let lh_input_grad =
            nets.label_head
                .backward_into(&lh_cache, &[dlogit], &mut grads.label_head)?;
        for (g, add) in latent_grads[cur].iter_mut().zip(&lh_input_grad) {
            *g += add;
        }
        // Both paths meet at the encoder, through the output ReLU.
        let mut frame_grads = vec![0.0; m * obs_dim];
        for (k, maybe) in encoded.iter().enumerate() {
            let Some(frame) = maybe else { continue };
            let mut zgrad = core::mem::take(&mut latent_grads[k]);
            frame.mask(&mut zgrad);
            let in_grad = nets
                .encoder
                .backward_into(&frame.cache, &zgrad, &mut grads.encoder)?;
            frame_grads[k * obs_dim..(k + 1) * obs_dim].copy_from_slice(&in_grad);
        }
        input_grads.push(frame_grads);
    }
    Ok(CiqEval {
        loss: (td_sum + lambda * bce_sum) * scale,
        td_loss: td_sum * scale,
        bce: bce_sum * scale,
        grads,
        input_grads,
        td_errors,
    })
}

/// Greedy evaluation outcome with the label head's view of the step.
#[derive(Debug, Clone)]
pub struct EvalDecision {
    pub action: usize,
    pub q: Vec<f64>,
    /// Predicted interference probability of the newest frame.
    pub p_current: f64,
    /// Switch bit actually used for head selection.
    pub switch: u8,
}

/// The switched-head agent: online and target copies of [`CiqNets`] with
/// per-network optimizer state.
#[derive(Debug, Clone)]
pub struct CiqAgent {
    nets: CiqNets,
    targets: CiqNets,
    adam_encoder: AdamState,
    adam_label: AdamState,
    adam_interfered: AdamState,
    adam_clean: AdamState,
    hyper: Hyper,
    m: usize,
}

impl CiqAgent {
    /// Fresh agent; every network gets one hidden layer of width `hidden`.
    pub fn new<R: Rng>(
        m: usize,
        obs_dim: usize,
        actions: usize,
        latent: usize,
        hidden: usize,
        hyper: Hyper,
        rng: &mut R,
    ) -> Result<Self> {
        if m == 0 || obs_dim == 0 || latent == 0 || hidden == 0 || actions < 2 {
            return Err(Error::InvalidConfig(
                "need nonzero window, observation, latent and hidden sizes, and two actions",
            ));
        }
        let nets = CiqNets {
            encoder: Mlp::new(&[obs_dim, hidden, latent], rng)?,
            label_head: Mlp::new(&[latent, hidden, 1], rng)?,
            head_interfered: Mlp::new(&[m * (latent + 1), hidden, actions], rng)?,
            head_clean: Mlp::new(&[m * (latent + 1), hidden, actions], rng)?,
        };
        Self::from_nets(m, nets, hyper)
    }

    /// Rebuild from checkpointed online networks; targets start as copies.
    pub fn from_nets(m: usize, nets: CiqNets, hyper: Hyper) -> Result<Self> {
        hyper.validate()?;
        nets.validate()?;
        if nets.m() != m {
            return Err(Error::ShapeMismatch {
                context: "agent window",
                expected: m,
                got: nets.m(),
            });
        }
        let targets = nets.clone();
        let adam_encoder = AdamState::new(&nets.encoder);
        let adam_label = AdamState::new(&nets.label_head);
        let adam_interfered = AdamState::new(&nets.head_interfered);
        let adam_clean = AdamState::new(&nets.head_clean);
        Ok(Self {
            nets,
            targets,
            adam_encoder,
            adam_label,
            adam_interfered,
            adam_clean,
            hyper,
            m,
        })
    }

    pub fn nets(&self) -> &CiqNets {
        &self.nets
    }

    pub fn hyper(&self) -> &Hyper {
        &self.hyper
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn obs_dim(&self) -> usize {
        self.nets.obs_dim()
    }

    pub fn actions(&self) -> usize {
        self.nets.actions()
    }

    pub fn latent_dim(&self) -> usize {
        self.nets.latent_dim()
    }

    /// Training-time action: the true labels fill the window and pick the
    /// head, exploration is epsilon-greedy.
    pub fn act_train<R: Rng>(
        &self,
        state: &StackedState,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<usize> {
        if state.valid() == 0 {
            return Err(Error::Uninitialized("stacked state has no frames"));
        }
        let labels = window_labels(state);
        let s_ci = self.nets.causal_state(state, &labels)?;
        let q = self.nets.q_switched(&s_ci, state.current_label())?;
        epsilon_greedy(&q, epsilon, rng)
    }

    /// Label-head prediction for one latent under the given mode. Returns
    /// `(probability, window entry)`.
    pub fn predict_label<R: Rng>(
        &self,
        latent: &[f64],
        mode: LabelMode,
        rng: &mut R,
    ) -> Result<(f64, f64)> {
        let p = self.nets.label_probability(latent)?;
        let entry = match mode {
            LabelMode::Sampled => f64::from(u8::from(rng.gen::<f64>() < p)),
            LabelMode::Hard => f64::from(hard_label(p)),
            LabelMode::Soft => p,
        };
        Ok((p, entry))
    }

    /// Greedy evaluation decision: the label head predicts every frame's
    /// label, the predictions fill the window, and the newest frame's
    /// prediction picks the head (soft probabilities threshold at 0.5).
    pub fn eval_decision<R: Rng>(
        &self,
        state: &StackedState,
        mode: LabelMode,
        rng: &mut R,
    ) -> Result<EvalDecision> {
        if state.valid() == 0 {
            return Err(Error::Uninitialized("stacked state has no frames"));
        }
        let l = self.latent_dim();
        let mut s_ci = Vec::with_capacity(state.m() * (l + 1));
        let mut p_current = 0.0;
        let mut switch = 0u8;
        for k in 0..state.m() {
            if state.is_padding(k) {
                s_ci.extend(core::iter::repeat(0.0).take(l + 1));
                continue;
            }
            let latent = self.nets.encode(state.frame(k))?;
            let (p, entry) = self.predict_label(&latent, mode, rng)?;
            s_ci.extend_from_slice(&latent);
            s_ci.push(entry);
            if k == state.m() - 1 {
                p_current = p;
                switch = match mode {
                    LabelMode::Soft => hard_label(p),
                    _ => u8::from(entry == 1.0),
                };
            }
        }
        let q = self.nets.q_switched(&s_ci, switch)?;
        let action = crate::math::argmax(&q);
        Ok(EvalDecision {
            action,
            q,
            p_current,
            switch,
        })
    }

    /// Target-side bootstrap values for a stored next state: target encoder,
    /// stored true labels, switch from the stored next-step label.
    pub fn bootstrap_q(&self, next_state: &StackedState) -> Result<Vec<f64>> {
        let labels = window_labels(next_state);
        let s_ci = self.targets.causal_state(next_state, &labels)?;
        self.targets.q_switched(&s_ci, next_state.current_label())
    }

    /// One joint gradient step plus soft target updates. `None` when the
    /// buffer cannot fill a batch yet.
    pub fn learn<R: Rng>(
        &mut self,
        buffer: &mut ReplayBuffer,
        rng: &mut R,
    ) -> Result<Option<LearnDiag>> {
        if buffer.len() < self.hyper.batch_size {
            return Ok(None);
        }
        let sample = buffer.sample(self.hyper.batch_size, rng)?;
        let eval = {
            let mut items = Vec::with_capacity(sample.indices.len());
            for (&idx, &weight) in sample.indices.iter().zip(&sample.weights) {
                let t = buffer.get(idx);
                let target_next = self.bootstrap_q(&t.next_state)?;
                let target =
                    super::dqn::td_target(t.reward, t.done, self.hyper.gamma, &target_next, None)?;
                items.push(CiqBatchItem {
                    state: &t.state,
                    action: t.action,
                    target,
                    weight,
                });
            }
            ciq_grads(
                &self.nets,
                &items,
                self.hyper.lambda,
                self.hyper.quantile,
                self.hyper.kappa,
            )?
        };
        let h = &self.hyper.adam;
        self.adam_encoder
            .step(&mut self.nets.encoder, &eval.grads.encoder, h)?;
        self.adam_label
            .step(&mut self.nets.label_head, &eval.grads.label_head, h)?;
        self.adam_interfered.step(
            &mut self.nets.head_interfered,
            &eval.grads.head_interfered,
            h,
        )?;
        self.adam_clean
            .step(&mut self.nets.head_clean, &eval.grads.head_clean, h)?;
        let tau = self.hyper.tau;
        polyak_update(&mut self.targets.encoder, &self.nets.encoder, tau)?;
        polyak_update(&mut self.targets.label_head, &self.nets.label_head, tau)?;
        polyak_update(
            &mut self.targets.head_interfered,
            &self.nets.head_interfered,
            tau,
        )?;
        polyak_update(&mut self.targets.head_clean, &self.nets.head_clean, tau)?;
        buffer.update_priorities(&sample.indices, &eval.td_errors)?;
        let mean_abs_td = eval.td_errors.iter().map(|u| crate::math::abs(*u)).sum::<f64>()
            / eval.td_errors.len() as f64;
        Ok(Some(LearnDiag {
            loss: eval.loss,
            mean_abs_td,
            bce: eval.bce,
        }))
    }

    /// Deterministic Q-function over raw stacked frames, for gradient-sign
    /// attacks and robustness certificates: every slot is treated as a real
    /// frame and labels come from the label head, thresholded hard.
    pub fn hard_view(&self) -> CiqQView<'_> {
        CiqQView {
            nets: &self.nets,
            m: self.m,
        }
    }
}

/// Hard-label [`QFunction`] view of a [`CiqNets`]; see
/// [`CiqAgent::hard_view`]. Label entries are discrete and contribute no
/// input gradient.
pub struct CiqQView<'a> {
    nets: &'a CiqNets,
    m: usize,
}

impl CiqQView<'_> {
    fn obs_dim(&self) -> usize {
        self.nets.obs_dim()
    }

    /// Forward pass keeping everything needed for the backward pass.
    fn forward_parts(&self, input: &[f64]) -> Result<(Vec<EncodedFrame>, Vec<f64>, u8)> {
        if input.len() != self.m * self.obs_dim() {
            return Err(Error::ShapeMismatch {
                context: "stacked input",
                expected: self.m * self.obs_dim(),
                got: input.len(),
            });
        }
        let obs_dim = self.obs_dim();
        let l = self.nets.latent_dim();
        let mut frames = Vec::with_capacity(self.m);
        let mut s_ci = Vec::with_capacity(self.m * (l + 1));
        let mut switch = 0u8;
        for k in 0..self.m {
            let (raw, cache) = self.nets.encoder.forward(&input[k * obs_dim..(k + 1) * obs_dim])?;
            let frame = EncodedFrame { raw, cache };
            let latent = frame.latent();
            let p = self.nets.label_probability(&latent)?;
            let label = hard_label(p);
            if k == self.m - 1 {
                switch = label;
            }
            s_ci.extend_from_slice(&latent);
            s_ci.push(f64::from(label));
            frames.push(frame);
        }
        Ok((frames, s_ci, switch))
    }
}

impl QFunction for CiqQView<'_> {
    fn input_dim(&self) -> usize {
        self.m * self.obs_dim()
    }

    fn num_actions(&self) -> usize {
        self.nets.actions()
    }

    fn q_values(&self, input: &[f64]) -> Result<Vec<f64>> {
        let (_, s_ci, switch) = self.forward_parts(input)?;
        self.nets.q_switched(&s_ci, switch)
    }

    fn q_and_input_grad(&self, input: &[f64], output_grad: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (frames, s_ci, switch) = self.forward_parts(input)?;
        let head = if switch == 1 {
            &self.nets.head_interfered
        } else {
            &self.nets.head_clean
        };
        let (q, head_cache) = head.forward(&s_ci)?;
        let (_, s_ci_grad) = head.backward(&head_cache, output_grad)?;
        let l = self.nets.latent_dim();
        let obs_dim = self.obs_dim();
        let mut input_grad = vec![0.0; input.len()];
        let mut enc_grads = Grads::zeros_like(&self.nets.encoder);
        for (k, frame) in frames.iter().enumerate() {
            let mut zgrad = s_ci_grad[k * (l + 1)..k * (l + 1) + l].to_vec();
            frame.mask(&mut zgrad);
            let g = self
                .nets
                .encoder
                .backward_into(&frame.cache, &zgrad, &mut enc_grads)?;
            input_grad[k * obs_dim..(k + 1) * obs_dim].copy_from_slice(&g);
        }
        Ok((q, input_grad))
    }
}
