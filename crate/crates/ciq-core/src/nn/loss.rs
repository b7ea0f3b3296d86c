//! Quantile Huber loss on temporal-difference errors, and the logit-space
//! binary cross entropy used by label heads and classifiers.

use crate::math::{abs, exp, ln, sigmoid};

/// Huber penalty `L_k(u)`: quadratic inside `[-kappa, kappa]`, linear
/// outside.
pub fn huber(u: f64, kappa: f64) -> f64 {
    let a = abs(u);
    if a <= kappa {
        0.5 * u * u
    } else {
        kappa * (a - 0.5 * kappa)
    }
}

/// Quantile Huber loss `rho_tau^kappa(u) = |tau - 1{u < 0}| * L_kappa(u)`.
///
/// `tau = 0.5` recovers a symmetric, half-scaled Huber penalty.
pub fn quantile_huber(u: f64, tau: f64, kappa: f64) -> f64 {
    quantile_weight(u, tau) * huber(u, kappa)
}

/// d/du of [`quantile_huber`]. The Huber derivative is `u` clamped to
/// `[-kappa, kappa]`.
pub fn quantile_huber_grad(u: f64, tau: f64, kappa: f64) -> f64 {
    quantile_weight(u, tau) * u.clamp(-kappa, kappa)
}

fn quantile_weight(u: f64, tau: f64) -> f64 {
    if u < 0.0 {
        abs(tau - 1.0)
    } else {
        abs(tau)
    }
}

/// Binary cross entropy of `sigmoid(logit)` against `target`, computed in
/// logit space so saturated heads cannot produce `ln(0)`:
/// `max(l, 0) - l*y + ln(1 + exp(-|l|))`.
pub fn bce_with_logits(logit: f64, target: f64) -> f64 {
    let hinge = if logit > 0.0 { logit } else { 0.0 };
    hinge - logit * target + ln(1.0 + exp(-abs(logit)))
}

/// d/dlogit of [`bce_with_logits`]: `sigmoid(logit) - target`.
pub fn bce_with_logits_grad(logit: f64, target: f64) -> f64 {
    sigmoid(logit) - target
}
