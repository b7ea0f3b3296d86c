//! Streaming per-dimension variance (Welford's update).
//!
//! Gaussian interference scales its noise by the variance of the clean
//! observations seen so far in the run, so the estimate must update online
//! without storing the history.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Count, running mean and sum of squared deviations per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningVariance {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningVariance {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("variance tracker needs dim >= 1"));
        }
        Ok(Self {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Fold one observation into the estimate.
    pub fn update(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.mean.len() {
            return Err(Error::ShapeMismatch {
                context: "variance update",
                expected: self.mean.len(),
                got: x.len(),
            });
        }
        self.count += 1;
        let n = self.count as f64;
        for ((m, m2), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let delta = v - *m;
            *m += delta / n;
            *m2 += delta * (v - *m);
        }
        Ok(())
    }

    /// Sample variance `M2 / (count - 1)`; needs at least two observations.
    pub fn variance(&self) -> Result<Vec<f64>> {
        if self.count < 2 {
            return Err(Error::Uninitialized("running variance"));
        }
        let denom = (self.count - 1) as f64;
        Ok(self.m2.iter().map(|&m2| m2 / denom).collect())
    }

    /// Per-dimension mean; needs at least one observation.
    pub fn mean(&self) -> Result<&[f64]> {
        if self.count < 1 {
            return Err(Error::Uninitialized("running mean"));
        }
        Ok(&self.mean)
    }
}
