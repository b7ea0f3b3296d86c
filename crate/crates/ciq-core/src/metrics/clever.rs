//! Sampling-based lower bound on the perturbation radius that preserves a
//! Q-function's greedy action.
//!
//! For each non-greedy action the margin to the greedy action is divided
//! by an estimate of the margin's local Lipschitz constant over a norm
//! ball around the state; the minimum over actions bounds how far the
//! input can move before the greedy action can flip. The Lipschitz
//! constant is estimated from dual-norm gradient magnitudes at uniform
//! samples in the ball, taking either the overall sample maximum or the
//! location parameter of a reverse-Weibull fit to per-batch maxima.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::math;
use crate::nn::QFunction;
use crate::{Error, Result};

/// Gradient magnitudes at or below this are treated as exactly zero.
const GRAD_FLOOR: f64 = 1e-12;

/// Norm choice for the perturbation ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PNorm {
    One,
    Two,
    Inf,
}

impl PNorm {
    /// The dual norm: gradients are measured in the dual of the
    /// perturbation norm.
    pub fn dual(self) -> Self {
        match self {
            Self::One => Self::Inf,
            Self::Two => Self::Two,
            Self::Inf => Self::One,
        }
    }

    /// Norm of a vector.
    pub fn norm(self, v: &[f64]) -> f64 {
        match self {
            Self::One => v.iter().map(|x| math::abs(*x)).sum(),
            Self::Two => math::sqrt(v.iter().map(|x| x * x).sum()),
            Self::Inf => v.iter().map(|x| math::abs(*x)).fold(0.0, f64::max),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::One => "l1",
            Self::Two => "l2",
            Self::Inf => "linf",
        }
    }
}

/// How the per-batch gradient maxima are turned into a Lipschitz estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LipschitzEstimator {
    /// Maximum over all sampled gradient norms.
    SampleMax,
    /// Location parameter of a reverse-Weibull fit to the batch maxima,
    /// falling back to the sample maximum when the fit degenerates.
    WeibullMle,
}

/// Parameters of the certificate search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CleverConfig {
    /// Perturbation norm.
    pub norm: PNorm,
    /// Ball radius searched; the certificate never exceeds it.
    pub radius: f64,
    /// Number of sample batches.
    pub batches: usize,
    /// Samples per batch.
    pub samples_per_batch: usize,
    /// Turning batch maxima into the Lipschitz estimate.
    pub estimator: LipschitzEstimator,
}

impl Default for CleverConfig {
    fn default() -> Self {
        Self {
            norm: PNorm::Two,
            radius: 0.5,
            batches: 50,
            samples_per_batch: 100,
            estimator: LipschitzEstimator::SampleMax,
        }
    }
}

impl CleverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::InvalidConfig("ball radius must be positive"));
        }
        if self.batches == 0 || self.samples_per_batch == 0 {
            return Err(Error::InvalidConfig("sampling counts must be positive"));
        }
        Ok(())
    }
}

/// Margin of action `a` below the greedy action at state `s`:
/// `Q(s, a*) - Q(s, a)` with the greedy action breaking ties toward the
/// lowest index.
pub fn margin(q: &dyn QFunction, s: &[f64], a: usize) -> Result<f64> {
    let values = q.q_values(s)?;
    if a >= values.len() {
        return Err(Error::Malformed("action index out of range"));
    }
    let a_star = math::argmax(&values);
    Ok(values[a_star] - values[a])
}

/// Draw a uniform sample from the `norm` ball of the given radius,
/// centered at the origin.
pub fn sample_in_ball<R: Rng>(dim: usize, norm: PNorm, radius: f64, rng: &mut R) -> Vec<f64> {
    match norm {
        PNorm::Inf => (0..dim)
            .map(|_| (2.0 * rng.gen::<f64>() - 1.0) * radius)
            .collect(),
        PNorm::Two => {
            // Gaussian direction, radius scaled by U^(1/d).
            let v: Vec<f64> = (0..dim).map(|_| crate::rng::normal01(rng)).collect();
            let n = PNorm::Two.norm(&v);
            if n <= 0.0 {
                return vec![0.0; dim];
            }
            let r = radius * math::powf(rng.gen::<f64>(), 1.0 / dim as f64);
            v.iter().map(|x| x * r / n).collect()
        }
        PNorm::One => {
            // dim + 1 exponentials: the first dim, normalized by the full
            // sum, are uniform over the simplex interior; random signs
            // spread that over all orthants.
            let e: Vec<f64> = (0..=dim)
                .map(|_| -math::ln(1.0 - rng.gen::<f64>()))
                .collect();
            let total: f64 = e.iter().sum();
            if total <= 0.0 {
                return vec![0.0; dim];
            }
            e[..dim]
                .iter()
                .map(|x| {
                    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                    sign * x / total * radius
                })
                .collect()
        }
    }
}

/// Certified lower bound on the perturbation radius (in the configured
/// norm) within which the greedy action at `s` cannot change.
///
/// Zero margins (ties for the greedy value) give a zero bound. If every
/// sampled gradient of a positive-margin action is zero the margin cannot
/// move anywhere in the sampled ball, so that action certifies the full
/// radius. The result is always in `[0, radius]`.
pub fn clever_q<R: Rng>(
    q: &dyn QFunction,
    s: &[f64],
    cfg: &CleverConfig,
    rng: &mut R,
) -> Result<f64> {
    cfg.validate()?;
    let q0 = q.q_values(s)?;
    if q0.len() < 2 {
        return Err(Error::InvalidConfig("need at least two actions"));
    }
    let a_star = math::argmax(&q0);
    let dual = cfg.norm.dual();
    let mut beta = cfg.radius;
    let mut out_grad = vec![0.0; q0.len()];
    for a in 0..q0.len() {
        if a == a_star {
            continue;
        }
        let g = q0[a_star] - q0[a];
        if g <= 0.0 {
            // Tied greedy value: any perturbation may flip the argmax.
            return Ok(0.0);
        }
        out_grad.fill(0.0);
        out_grad[a_star] = 1.0;
        out_grad[a] = -1.0;

        let mut batch_maxima = Vec::with_capacity(cfg.batches);
        for _ in 0..cfg.batches {
            let mut batch_max = 0.0f64;
            for _ in 0..cfg.samples_per_batch {
                let delta = sample_in_ball(s.len(), cfg.norm, cfg.radius, rng);
                let x: Vec<f64> = s.iter().zip(&delta).map(|(a, b)| a + b).collect();
                let (_, grad) = q.q_and_input_grad(&x, &out_grad)?;
                batch_max = batch_max.max(dual.norm(&grad));
            }
            batch_maxima.push(batch_max);
        }
        let sample_max = batch_maxima.iter().copied().fold(0.0, f64::max);
        let lipschitz = match cfg.estimator {
            LipschitzEstimator::SampleMax => sample_max,
            LipschitzEstimator::WeibullMle => {
                fit_reverse_weibull_location(&batch_maxima).unwrap_or(sample_max)
            }
        };
        let beta_a = if lipschitz <= GRAD_FLOOR {
            // Margin is locally constant over every sample: certified up
            // to the ball we actually searched.
            cfg.radius
        } else {
            (g / lipschitz).min(cfg.radius)
        };
        beta = beta.min(beta_a);
    }
    Ok(beta)
}

/// Empirical check of the certificate: draw `trials` perturbations of norm
/// at most `beta` and confirm the greedy action never changes. Returns
/// `false` as soon as a flip is found.
pub fn verify_theorem1<R: Rng>(
    q: &dyn QFunction,
    s: &[f64],
    beta: f64,
    trials: usize,
    norm: PNorm,
    rng: &mut R,
) -> Result<bool> {
    if beta < 0.0 || !beta.is_finite() {
        return Err(Error::Malformed("radius must be nonnegative"));
    }
    let a0 = math::argmax(&q.q_values(s)?);
    if beta == 0.0 {
        return Ok(true);
    }
    for _ in 0..trials {
        let delta = sample_in_ball(s.len(), norm, beta, rng);
        let x: Vec<f64> = s.iter().zip(&delta).map(|(a, b)| a + b).collect();
        if math::argmax(&q.q_values(&x)?) != a0 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Location parameter of a reverse-Weibull distribution fit to a sample of
/// maxima by maximum likelihood, profiling over the location.
///
/// The reverse Weibull has a finite upper endpoint (the location), which
/// estimates the supremum the maxima approach. Returns `None` when the
/// sample is too small or too degenerate to fit; callers fall back to the
/// plain sample maximum.
pub fn fit_reverse_weibull_location(maxima: &[f64]) -> Option<f64> {
    let n = maxima.len();
    if n < 3 {
        return None;
    }
    let max_m = maxima.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_m = maxima.iter().copied().fold(f64::INFINITY, f64::min);
    if !max_m.is_finite() || !min_m.is_finite() || max_m - min_m < 1e-12 {
        return None;
    }
    let span = max_m - min_m;

    let mut best: Option<(f64, f64)> = None; // (log-likelihood, location)
    const CANDIDATES: usize = 64;
    for j in 1..=CANDIDATES {
        // Candidate endpoints from just above the sample max out to three
        // spreads beyond it.
        let a = max_m + span * 3.0 * j as f64 / CANDIDATES as f64;
        if let Some((ll, _k, _s)) = weibull_fit_at(maxima, a) {
            if best.map_or(true, |(b, _)| ll > b) {
                best = Some((ll, a));
            }
        }
    }
    // Also probe a hairline above the sample max, where the likelihood
    // often peaks for sharply concentrated maxima.
    let a = max_m + span * 1e-3;
    if let Some((ll, _k, _s)) = weibull_fit_at(maxima, a) {
        if best.map_or(true, |(b, _)| ll > b) {
            best = Some((ll, a));
        }
    }
    best.map(|(_, a)| a)
}

/// Maximum-likelihood Weibull fit of `a - m_i` for a fixed endpoint `a`,
/// returning the profile log-likelihood and the shape/scale at optimum.
fn weibull_fit_at(maxima: &[f64], a: f64) -> Option<(f64, f64, f64)> {
    let n = maxima.len() as f64;
    let y: Vec<f64> = maxima.iter().map(|m| a - m).collect();
    if y.iter().any(|v| *v <= 0.0) {
        return None;
    }
    let mean_ln: f64 = y.iter().map(|v| math::ln(*v)).sum::<f64>() / n;

    // The shape score is increasing in k; solve by bisection.
    let score = |k: f64| -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for v in &y {
            let vk = math::powf(*v, k);
            num += vk * math::ln(*v);
            den += vk;
        }
        num / den - 1.0 / k - mean_ln
    };
    let (mut lo, mut hi) = (1e-3, 1e3);
    let (slo, shi) = (score(lo), score(hi));
    if !slo.is_finite() || !shi.is_finite() || slo.signum() == shi.signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if score(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let k = 0.5 * (lo + hi);
    let mean_yk: f64 = y.iter().map(|v| math::powf(*v, k)).sum::<f64>() / n;
    let s = math::powf(mean_yk, 1.0 / k);
    if !(s > 0.0) || !s.is_finite() {
        return None;
    }
    let mut ll = n * (math::ln(k) - k * math::ln(s));
    for v in &y {
        ll += (k - 1.0) * math::ln(*v) - math::powf(*v / s, k);
    }
    ll.is_finite().then_some((ll, k, s))
}
