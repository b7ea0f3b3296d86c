//! Transition storage: a ring buffer with uniform or proportional sampling.
//!
//! Proportional mode keeps priorities in a sum tree, inserts at the current
//! maximum so fresh transitions are seen at least once, and hands out
//! importance weights normalized by the batch maximum.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use super::stack::StackedState;
use crate::{Error, Result};

/// One step of experience. The stacked states carry their per-frame labels,
/// so the current step's label is `state.current_label()` and the label
/// driving the target-side switch is `next_state.current_label()`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: StackedState,
    pub action: usize,
    pub reward: f64,
    pub next_state: StackedState,
    pub done: bool,
    /// Training-time interference label of the current step.
    pub label: u8,
}

/// Sampled batch: indices into the buffer plus importance weights
/// (all 1 under uniform sampling, max-normalized under prioritization).
#[derive(Debug, Clone)]
pub struct SampleBatch {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Binary-indexed tree over leaf priorities supporting prefix-mass lookup.
///
/// The leaf count is rounded up to a power of two so that leaf order equals
/// item order; surplus leaves keep priority 0 and are never selected.
#[derive(Debug, Clone)]
struct SumTree {
    /// Flat heap: `cap - 1` internal nodes followed by `cap` leaves.
    nodes: Vec<f64>,
    cap: usize,
}

impl SumTree {
    fn new(len: usize) -> Self {
        let cap = len.next_power_of_two();
        Self {
            nodes: vec![0.0; 2 * cap - 1],
            cap,
        }
    }

    fn total(&self) -> f64 {
        self.nodes[0]
    }

    fn get(&self, leaf: usize) -> f64 {
        self.nodes[self.cap - 1 + leaf]
    }

    fn set(&mut self, leaf: usize, priority: f64) {
        let mut idx = self.cap - 1 + leaf;
        let delta = priority - self.nodes[idx];
        self.nodes[idx] = priority;
        while idx > 0 {
            idx = (idx - 1) / 2;
            self.nodes[idx] += delta;
        }
    }

    /// Leaf whose cumulative-priority interval contains `mass`.
    fn find(&self, mass: f64) -> usize {
        let mut idx = 0;
        let mut mass = mass;
        while idx < self.cap - 1 {
            let left = 2 * idx + 1;
            if mass <= self.nodes[left] {
                idx = left;
            } else {
                mass -= self.nodes[left];
                idx = left + 1;
            }
        }
        idx - (self.cap - 1)
    }
}

/// Ring buffer of [`Transition`]s with optional proportional prioritization.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: usize,
    /// Next ring slot to overwrite once full.
    next: usize,
    priorities: Option<SumTree>,
    max_priority: f64,
    alpha: f64,
    beta: f64,
}

/// Additive floor keeping zero TD errors sampleable.
const PRIORITY_EPS: f64 = 1e-6;

impl ReplayBuffer {
    /// Uniformly sampled buffer.
    pub fn uniform(capacity: usize) -> Result<Self> {
        Self::build(capacity, None)
    }

    /// Proportional buffer: priorities `(|td| + 1e-6)^alpha`, importance
    /// weights `(n * P(i))^-beta` normalized by the batch maximum.
    pub fn prioritized(capacity: usize, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite() && beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidConfig(
                "priority exponents must be finite and nonnegative",
            ));
        }
        let mut buf = Self::build(capacity, Some(SumTree::new(capacity)))?;
        buf.alpha = alpha;
        buf.beta = beta;
        Ok(buf)
    }

    fn build(capacity: usize, priorities: Option<SumTree>) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig("replay capacity must be nonzero"));
        }
        Ok(Self {
            items: Vec::new(),
            capacity,
            next: 0,
            priorities,
            max_priority: 1.0,
            alpha: 0.6,
            beta: 0.4,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn is_prioritized(&self) -> bool {
        self.priorities.is_some()
    }

    pub fn get(&self, index: usize) -> &Transition {
        &self.items[index]
    }

    /// Store a transition, overwriting the oldest once at capacity. Under
    /// prioritization the slot enters at the running maximum priority.
    pub fn push(&mut self, t: Transition) {
        let slot = self.next;
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[slot] = t;
        }
        if let Some(tree) = &mut self.priorities {
            tree.set(slot, self.max_priority);
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Draw `batch` indices with replacement.
    pub fn sample<R: Rng>(&self, batch: usize, rng: &mut R) -> Result<SampleBatch> {
        if self.items.is_empty() {
            return Err(Error::Uninitialized("replay buffer"));
        }
        if batch == 0 {
            return Err(Error::InvalidConfig("batch size must be nonzero"));
        }
        let n = self.items.len();
        match &self.priorities {
            None => {
                let indices: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..n)).collect();
                Ok(SampleBatch {
                    weights: vec![1.0; batch],
                    indices,
                })
            }
            Some(tree) => {
                let total = tree.total();
                if total <= 0.0 {
                    return Err(Error::Uninitialized("replay priorities"));
                }
                let mut indices = Vec::with_capacity(batch);
                let mut weights = Vec::with_capacity(batch);
                for _ in 0..batch {
                    let mass = rng.gen_range(0.0..total);
                    // A boundary hit can land on a zero-priority padding
                    // leaf; clamp back into the stored range.
                    let idx = tree.find(mass).min(n - 1);
                    let prob = tree.get(idx) / total;
                    indices.push(idx);
                    weights.push(crate::math::powf(n as f64 * prob, -self.beta));
                }
                let max_w = weights.iter().cloned().fold(f64::MIN, f64::max);
                for w in &mut weights {
                    *w /= max_w;
                }
                Ok(SampleBatch { indices, weights })
            }
        }
    }

    /// Refresh priorities from the latest TD errors; no-op when uniform.
    pub fn update_priorities(&mut self, indices: &[usize], td_errors: &[f64]) -> Result<()> {
        let Some(tree) = &mut self.priorities else {
            return Ok(());
        };
        if indices.len() != td_errors.len() {
            return Err(Error::ShapeMismatch {
                context: "priority update",
                expected: indices.len(),
                got: td_errors.len(),
            });
        }
        for (&idx, &td) in indices.iter().zip(td_errors) {
            let p = crate::math::powf(crate::math::abs(td) + PRIORITY_EPS, self.alpha);
            tree.set(idx, p);
            if p > self.max_priority {
                self.max_priority = p;
            }
        }
        Ok(())
    }
}
