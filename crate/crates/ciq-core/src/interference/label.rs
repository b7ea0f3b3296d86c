//! Binary interference-label processes.
//!
//! A label process decides, step by step, whether the incoming observation
//! is replaced by the interference generator (`1`) or delivered untouched
//! (`0`).

use rand::Rng;

use crate::{Error, Result};

/// When and how often interference strikes.
#[derive(Debug, Clone, PartialEq)]
pub enum LabelProcess {
    /// Independent coin with fixed rate `p`.
    Bernoulli { p: f64 },
    /// Two-state chain: `p11 = P(1 | previous 1)`, `p10 = P(1 | previous 0)`.
    /// Produces bursts whose stationary rate is `p10 / (p10 + 1 - p11)`.
    Markov { p11: f64, p10: f64, prev: u8 },
    /// Deterministic rate sweep
    /// `p(t) = low + (high - low) * (1 + cos(2 pi t / period)) / 2`,
    /// starting at `high` and dipping to `low` mid-period.
    Cosine { low: f64, high: f64, period: u32 },
}

impl LabelProcess {
    pub fn bernoulli(p: f64) -> Result<Self> {
        check_prob(p)?;
        Ok(Self::Bernoulli { p })
    }

    pub fn markov(p11: f64, p10: f64) -> Result<Self> {
        check_prob(p11)?;
        check_prob(p10)?;
        Ok(Self::Markov { p11, p10, prev: 0 })
    }

    pub fn cosine(low: f64, high: f64, period: u32) -> Result<Self> {
        check_prob(low)?;
        check_prob(high)?;
        if low > high {
            return Err(Error::InvalidConfig("cosine range needs low <= high"));
        }
        if period == 0 {
            return Err(Error::InvalidConfig("cosine period must be positive"));
        }
        Ok(Self::Cosine { low, high, period })
    }

    /// The probability the next draw at step `t` comes up 1, given current
    /// internal state.
    pub fn probability(&self, t: u64) -> f64 {
        match self {
            Self::Bernoulli { p } => *p,
            Self::Markov { p11, p10, prev } => {
                if *prev == 1 {
                    *p11
                } else {
                    *p10
                }
            }
            Self::Cosine { low, high, period } => {
                let phase =
                    2.0 * core::f64::consts::PI * (t % u64::from(*period)) as f64
                        / f64::from(*period);
                low + (high - low) * (1.0 + crate::math::cos(phase)) / 2.0
            }
        }
    }

    /// Draw the label for step `t` and advance internal state.
    pub fn sample<R: Rng>(&mut self, t: u64, rng: &mut R) -> u8 {
        let p = self.probability(t);
        let bit = u8::from(rng.gen_range(0.0..1.0) < p);
        if let Self::Markov { prev, .. } = self {
            *prev = bit;
        }
        bit
    }

    /// Forget burst state; new episodes start from the quiet state.
    pub fn reset(&mut self) {
        if let Self::Markov { prev, .. } = self {
            *prev = 0;
        }
    }
}

/// Long-run rate of a Markov label chain, `p10 / (p10 + 1 - p11)`.
///
/// Undefined for the absorbing combination `p10 = 0`, `p11 = 1`.
pub fn markov_stationary(p11: f64, p10: f64) -> Result<f64> {
    check_prob(p11)?;
    check_prob(p10)?;
    let denom = p10 + 1.0 - p11;
    if denom == 0.0 {
        return Err(Error::InvalidConfig(
            "markov chain with p10 = 0, p11 = 1 has no unique stationary rate",
        ));
    }
    Ok(p10 / denom)
}

fn check_prob(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidConfig("probability outside [0, 1]"))
    }
}
