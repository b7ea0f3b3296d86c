//! Fast gradient-sign perturbation against a Q-function.
//!
//! The attack objective is the cross-entropy of the Q-vector's softmax
//! against the greedy action: one gradient of `-log softmax(Q(x))[argmax]`
//! with respect to the input, then a signed step of size `epsilon`. Only the
//! coordinates in `slot` move, so a stacked observation can be attacked in
//! its current frame alone.

use alloc::vec::Vec;
use core::ops::Range;

use crate::math::{argmax, exp, sign};
use crate::nn::QFunction;
use crate::{Error, Result};

/// Perturb `input[slot]` by `epsilon * sign(grad)`; `sign(0) = 0`, so the
/// result always satisfies `||out - input||_inf <= epsilon`.
pub fn fgsm(q: &dyn QFunction, input: &[f64], slot: Range<usize>, epsilon: f64) -> Result<Vec<f64>> {
    if epsilon < 0.0 || !epsilon.is_finite() {
        return Err(Error::InvalidConfig("fgsm epsilon must be nonnegative"));
    }
    if slot.end > input.len() || slot.start > slot.end {
        return Err(Error::ShapeMismatch {
            context: "fgsm slot",
            expected: input.len(),
            got: slot.end,
        });
    }
    let probe = q.q_values(input)?;
    let greedy = argmax(&probe);
    let mut output_grad = softmax(&probe);
    output_grad[greedy] -= 1.0;
    let (_, input_grad) = q.q_and_input_grad(input, &output_grad)?;

    let mut out = input.to_vec();
    for i in slot {
        out[i] += epsilon * sign(input_grad[i]);
    }
    Ok(out)
}

/// Numerically stable softmax.
pub fn softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|&x| exp(x - max)).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}
