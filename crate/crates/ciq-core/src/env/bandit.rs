//! Two-armed contextual bandit with blackout interference on one context.
//!
//! The context `x` is a fair coin. Arm 0 always pays 0. Arm 1 pays +1 with
//! probability `q_x`, otherwise -1, where `q0` is tied to `q1` by
//! `q0 = (3 - q1) / 5`. That coupling makes the observed success rate of
//! arm 1 given a blacked-out observation exactly 1/2 whenever `x = 1`
//! observations are zeroed with probability `p_blackout`, so an agent that
//! ignores interference labels can no longer distinguish the contexts from
//! blacked-out samples alone.

use rand::Rng;

use crate::{Error, Result};

/// Arm-1 payoff probabilities and the blackout rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BanditConfig {
    /// P(arm 1 pays +1 | x = 1).
    pub q1: f64,
    /// Probability that an `x = 1` observation is delivered as 0.
    pub p_blackout: f64,
}

impl Default for BanditConfig {
    fn default() -> Self {
        Self {
            q1: 0.7,
            p_blackout: 0.2,
        }
    }
}

impl BanditConfig {
    /// P(arm 1 pays +1 | x = 0), coupled so that
    /// P(+1 | observed 0, arm 1) = 1/2 under blackout.
    pub fn q0(&self) -> f64 {
        (3.0 - self.q1) / 5.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.q1) || !(0.0..=1.0).contains(&self.p_blackout) {
            return Err(Error::InvalidConfig(
                "bandit probabilities must lie in [0, 1]",
            ));
        }
        Ok(())
    }
}

/// One pull: what the agent saw, whether it was interfered, what it earned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BanditStep {
    pub observed: u8,
    pub label: u8,
    pub reward: f64,
}

/// Deliver the observation: `x = 1` turns into 0 with probability
/// `p_blackout` (labelled), `x = 0` passes through untouched.
pub fn blackout_observe<R: Rng>(
    x: u8,
    cfg: &BanditConfig,
    apply_blackout: bool,
    rng: &mut R,
) -> (u8, u8) {
    if apply_blackout && x == 1 && rng.gen_range(0.0..1.0) < cfg.p_blackout {
        (0, 1)
    } else {
        (x, 0)
    }
}

/// Payoff of `action` in true context `x`.
pub fn bandit_reward<R: Rng>(x: u8, action: u8, cfg: &BanditConfig, rng: &mut R) -> f64 {
    if action == 0 {
        return 0.0;
    }
    let q = if x == 1 { cfg.q1 } else { cfg.q0() };
    if rng.gen_range(0.0..1.0) < q {
        1.0
    } else {
        -1.0
    }
}

/// One full pull: observation (with optional blackout) first, then reward.
pub fn bandit_step<R: Rng>(
    x: u8,
    action: u8,
    cfg: &BanditConfig,
    apply_blackout: bool,
    rng: &mut R,
) -> Result<BanditStep> {
    cfg.validate()?;
    if x > 1 || action > 1 {
        return Err(Error::InvalidConfig("bandit context and action are binary"));
    }
    let (observed, label) = blackout_observe(x, cfg, apply_blackout, rng);
    let reward = bandit_reward(x, action, cfg, rng);
    Ok(BanditStep {
        observed,
        label,
        reward,
    })
}
