//! Environments: cart-pole balancing and a two-armed contextual bandit.

mod bandit;
mod cartpole;

pub use bandit::{bandit_reward, bandit_step, blackout_observe, BanditConfig, BanditStep};
pub use cartpole::{Cartpole, CartpoleState, StepOutcome};

use crate::math::mean;

/// Success rule shared by training and reporting: the mean over the most
/// recent `min(100, len)` returns reaches `target`. No returns yet means not
/// solved.
pub fn is_solved(returns: &[f64], target: f64) -> bool {
    if returns.is_empty() {
        return false;
    }
    let window = returns.len().min(100);
    mean(&returns[returns.len() - window..]) >= target
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn is_solved_uses_available_window_when_short() {
        let returns = vec![200.0; 50];
        assert!(is_solved(&returns, 195.0));
    }

    #[test]
    fn is_solved_requires_the_last_hundred_to_average_up() {
        let mut returns = vec![200.0; 100];
        returns.extend(vec![10.0; 100]);
        assert!(!is_solved(&returns, 195.0));
        assert!(is_solved(&returns, 10.0));
    }

    #[test]
    fn is_solved_boundary_is_inclusive() {
        assert!(is_solved(&[195.0; 100], 195.0));
        assert!(!is_solved(&[194.999; 100], 195.0));
    }

    #[test]
    fn no_returns_is_not_solved() {
        assert!(!is_solved(&[], 0.0));
    }
}
