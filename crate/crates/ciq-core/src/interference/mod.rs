//! Observation interference: label processes, generators and composition.
//!
//! Each step the label process emits `i_t`; the delivered observation is
//! `x'_t = i_t * I(x_t) + (1 - i_t) * x_t` with `I` the configured
//! generator. Composition is implemented as exact selection, so a clean step
//! delivers the original observation bit for bit.

mod fgsm;
mod label;
mod variance;

pub use fgsm::{fgsm, softmax};
pub use label::{markov_stationary, LabelProcess};
pub use variance::RunningVariance;

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::math::sqrt;
use crate::nn::QFunction;
use crate::rng::normal01;
use crate::{Error, Result};

/// The five observation generators.
#[derive(Debug, Clone, PartialEq)]
pub enum InterferenceKind {
    /// Zero-mean noise with the running per-dimension variance of the clean
    /// observations recorded so far.
    Gaussian,
    /// Gradient-sign attack of magnitude `epsilon` on the current frame,
    /// white-box against the acting agent's Q-function.
    Adversarial { epsilon: f64 },
    /// All-zero observation.
    Blackout,
    /// Maximum nominal magnitude in every dimension.
    Whiteout,
    /// The observation delivered before the interference run began; a zero
    /// vector when interference hits the first step of an episode.
    Frozen,
}

impl InterferenceKind {
    pub fn validate(&self) -> Result<()> {
        if let Self::Adversarial { epsilon } = self {
            if *epsilon < 0.0 || !epsilon.is_finite() {
                return Err(Error::InvalidConfig("attack epsilon must be nonnegative"));
            }
        }
        Ok(())
    }
}

/// Eq-style composition: deliver `interfered` when `label` is 1, otherwise
/// the clean observation, exactly.
pub fn compose(clean: &[f64], label: u8, interfered: &[f64]) -> Vec<f64> {
    if label == 1 {
        interfered.to_vec()
    } else {
        clean.to_vec()
    }
}

/// Nested composition for several simultaneous generators: the first label
/// gates all interference; among active generators the earliest labelled 1
/// wins, and the last is the fallback once interference is on.
///
/// For two generators this is
/// `x' = i1 * (i2 * I1 + (1 - i2) * I2) + (1 - i1) * x`.
pub fn compose_multi(clean: &[f64], labels: &[u8], interfered: &[Vec<f64>]) -> Result<Vec<f64>> {
    if labels.is_empty() || labels.len() != interfered.len() {
        return Err(Error::ShapeMismatch {
            context: "compose_multi labels",
            expected: interfered.len().max(1),
            got: labels.len(),
        });
    }
    if interfered.iter().any(|v| v.len() != clean.len()) {
        return Err(Error::ShapeMismatch {
            context: "compose_multi observations",
            expected: clean.len(),
            got: interfered.iter().map(Vec::len).find(|&l| l != clean.len()).unwrap_or(0),
        });
    }
    if labels[0] == 0 {
        return Ok(clean.to_vec());
    }
    for (k, &bit) in labels.iter().enumerate().skip(1) {
        if bit == 1 {
            return Ok(interfered[k - 1].clone());
        }
    }
    Ok(interfered[labels.len() - 1].clone())
}

/// What the agent needs to mount the white-box attack: its own Q-function
/// over stacked inputs, plus the already-delivered previous frames.
pub struct AttackTarget<'a> {
    pub q: &'a dyn QFunction,
    /// Flattened frames preceding the current one, together `q.input_dim() -
    /// obs_dim` long.
    pub prefix: &'a [f64],
}

/// One delivered observation with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceEvent {
    pub label: u8,
    /// Interference probability in force when the label was drawn.
    pub probability: f64,
    pub clean: Vec<f64>,
    pub delivered: Vec<f64>,
}

/// Stateful per-run interference pipeline.
///
/// Holds the label process, the Welford variance over every clean
/// observation of the run, and the frozen-frame register. `kind = None`
/// delivers every observation untouched (clean runs share the code path).
#[derive(Debug)]
pub struct InterferenceLayer {
    kind: Option<InterferenceKind>,
    label: LabelProcess,
    variance: RunningVariance,
    /// Last observation delivered while uninterfered, i.e. the frame a
    /// frozen run keeps replaying.
    held: Option<Vec<f64>>,
    bounds: Vec<f64>,
    t: u64,
}

impl InterferenceLayer {
    pub fn new(
        kind: Option<InterferenceKind>,
        label: LabelProcess,
        obs_dim: usize,
        nominal_bounds: &[f64],
    ) -> Result<Self> {
        if let Some(kind) = &kind {
            kind.validate()?;
            if *kind == InterferenceKind::Whiteout && nominal_bounds.len() != obs_dim {
                return Err(Error::ShapeMismatch {
                    context: "whiteout bounds",
                    expected: obs_dim,
                    got: nominal_bounds.len(),
                });
            }
        }
        Ok(Self {
            kind,
            label,
            variance: RunningVariance::new(obs_dim)?,
            held: None,
            bounds: nominal_bounds.to_vec(),
            t: 0,
        })
    }

    /// A layer that never interferes.
    pub fn clean(obs_dim: usize) -> Result<Self> {
        Self::new(None, LabelProcess::bernoulli(0.0)?, obs_dim, &[])
    }

    pub fn kind(&self) -> Option<&InterferenceKind> {
        self.kind.as_ref()
    }

    /// Steps observed since construction.
    pub fn steps_seen(&self) -> u64 {
        self.t
    }

    /// Clean-observation variance recorded so far.
    pub fn running_variance(&self) -> &RunningVariance {
        &self.variance
    }

    /// Start a new episode: label bursts and the frozen register reset; the
    /// variance estimate deliberately survives, it belongs to the run.
    pub fn reset_episode(&mut self) {
        self.label.reset();
        self.held = None;
        self.t = 0;
    }

    /// Process one clean observation into what the agent sees.
    ///
    /// `attack` must be provided iff the generator is adversarial.
    pub fn observe<R: Rng>(
        &mut self,
        clean: &[f64],
        attack: Option<AttackTarget<'_>>,
        rng: &mut R,
    ) -> Result<InterferenceEvent> {
        if clean.len() != self.variance.dim() {
            return Err(Error::ShapeMismatch {
                context: "interference observation",
                expected: self.variance.dim(),
                got: clean.len(),
            });
        }
        self.variance.update(clean)?;
        let (probability, label) = match &self.kind {
            None => (0.0, 0),
            Some(_) => {
                let p = self.label.probability(self.t);
                (p, self.label.sample(self.t, rng))
            }
        };
        let delivered = if label == 1 {
            let generated = self.generate(clean, attack, rng)?;
            compose(clean, 1, &generated)
        } else {
            compose(clean, 0, clean)
        };
        if label == 0 {
            self.held = Some(delivered.clone());
        }
        self.t += 1;
        Ok(InterferenceEvent {
            label,
            probability,
            clean: clean.to_vec(),
            delivered,
        })
    }

    fn generate<R: Rng>(
        &mut self,
        clean: &[f64],
        attack: Option<AttackTarget<'_>>,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let kind = self.kind.as_ref().expect("generate only runs when labelled");
        match kind {
            InterferenceKind::Gaussian => {
                // One observation recorded so far means zero spread: the
                // noise is degenerate at 0 and the frame passes unchanged.
                let variance = if self.variance.count() < 2 {
                    vec![0.0; clean.len()]
                } else {
                    self.variance.variance()?
                };
                Ok(clean
                    .iter()
                    .zip(&variance)
                    .map(|(&x, &v)| x + sqrt(v) * normal01(rng))
                    .collect())
            }
            InterferenceKind::Adversarial { epsilon } => {
                let target = attack
                    .ok_or(Error::Uninitialized("adversarial attack target"))?;
                let expected = target.prefix.len() + clean.len();
                if target.q.input_dim() != expected {
                    return Err(Error::ShapeMismatch {
                        context: "attack input",
                        expected,
                        got: target.q.input_dim(),
                    });
                }
                let mut stacked = Vec::with_capacity(expected);
                stacked.extend_from_slice(target.prefix);
                stacked.extend_from_slice(clean);
                let slot = target.prefix.len()..expected;
                let perturbed = fgsm(target.q, &stacked, slot.clone(), *epsilon)?;
                Ok(perturbed[slot].to_vec())
            }
            InterferenceKind::Blackout => Ok(vec![0.0; clean.len()]),
            InterferenceKind::Whiteout => Ok(self.bounds.clone()),
            InterferenceKind::Frozen => {
                Ok(self.held.clone().unwrap_or_else(|| vec![0.0; clean.len()]))
            }
        }
    }
}
