//! Standalone per-frame interference classifier.
//!
//! Agents without a built-in label head get their test-time labels from
//! this: a small sigmoid-output network trained on (observation, label)
//! pairs mined from the replay buffer, with a held-out split for an honest
//! accuracy figure.

use alloc::vec::Vec;
use rand::seq::SliceRandom;

use super::hard_label;
use crate::math::sigmoid;
use crate::nn::{bce_with_logits_grad, AdamHyper, AdamState, Grads, Mlp};
use crate::{Error, Result};

/// Trained classifier with its held-out accuracy.
#[derive(Debug, Clone)]
pub struct ClassifierReport {
    pub net: Mlp,
    pub holdout_accuracy: f64,
    pub train_count: usize,
    pub holdout_count: usize,
}

/// Probability and thresholded label for one observation.
pub fn classify(net: &Mlp, x: &[f64]) -> Result<(f64, u8)> {
    let p = sigmoid(net.value(x)?[0]);
    Ok((p, hard_label(p)))
}

const HIDDEN: usize = 32;
const EPOCHS: usize = 30;
const MINI_BATCH: usize = 64;

/// Train a two-hidden-layer classifier on binary cross entropy with Adam.
///
/// The data is shuffled once by `seed` and split 80/20; accuracy is
/// measured on the held-out 20% (on the training set itself when the
/// dataset is too small to spare a holdout). Both classes must be present.
pub fn train_aux_classifier(
    inputs: &[Vec<f64>],
    labels: &[u8],
    seed: u64,
) -> Result<ClassifierReport> {
    if inputs.is_empty() {
        return Err(Error::InvalidConfig("empty classifier dataset"));
    }
    if inputs.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            context: "classifier labels",
            expected: inputs.len(),
            got: labels.len(),
        });
    }
    let dim = inputs[0].len();
    if dim == 0 || inputs.iter().any(|x| x.len() != dim) {
        return Err(Error::ShapeMismatch {
            context: "classifier inputs",
            expected: dim,
            got: 0,
        });
    }
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::SingleClass);
    }

    let mut rng = crate::rng::stream(seed, crate::rng::streams::INIT);
    let mut net = Mlp::new(&[dim, HIDDEN, HIDDEN, 1], &mut rng)?;
    let mut adam = AdamState::new(&net);
    let hyper = AdamHyper {
        lr: 1e-3,
        ..Default::default()
    };

    let n = inputs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let holdout_count = n / 5;
    let train_count = n - holdout_count;
    let (train_idx, holdout_idx) = order.split_at(train_count);

    for _ in 0..EPOCHS {
        let mut epoch_order = train_idx.to_vec();
        epoch_order.shuffle(&mut rng);
        for chunk in epoch_order.chunks(MINI_BATCH) {
            let mut grads = Grads::zeros_like(&net);
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let (out, cache) = net.forward(&inputs[i])?;
                let dlogit = scale * bce_with_logits_grad(out[0], f64::from(labels[i]));
                net.backward_into(&cache, &[dlogit], &mut grads)?;
            }
            adam.step(&mut net, &grads, &hyper)?;
        }
    }

    let eval_idx: &[usize] = if holdout_idx.is_empty() {
        train_idx
    } else {
        holdout_idx
    };
    let mut correct = 0usize;
    for &i in eval_idx {
        let (_, label) = classify(&net, &inputs[i])?;
        if label == labels[i] {
            correct += 1;
        }
    }
    Ok(ClassifierReport {
        net,
        holdout_accuracy: correct as f64 / eval_idx.len() as f64,
        train_count,
        holdout_count: eval_idx.len(),
    })
}
