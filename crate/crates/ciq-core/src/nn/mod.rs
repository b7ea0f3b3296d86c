//! Dense networks with exact, hand-rolled gradients.
//!
//! The networks here are small (a few thousand parameters), so everything is
//! plain `Vec<f64>` arithmetic: no autograd graph, no batching inside the
//! kernels. Layers apply ReLU on every hidden layer and identity on the
//! output layer; weight matrices are stored row-major as `(out_dim, in_dim)`.
//!
//! `backward` returns exact input gradients alongside parameter gradients.
//! Input gradients are a first-class output because gradient-sign attacks
//! and the robustness certificate both differentiate with respect to the
//! observation.

mod bytes;
mod loss;
mod optim;

pub use loss::{bce_with_logits, bce_with_logits_grad, huber, quantile_huber, quantile_huber_grad};
pub use optim::{polyak_update, AdamHyper, AdamState};

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::math::{dot, sqrt};
use crate::{Error, Result};

/// Fully connected network: ReLU hidden layers, identity output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    /// Layer widths, `[input, hidden.., output]`.
    sizes: Vec<usize>,
    /// `weights[l]` is `(sizes[l+1], sizes[l])` row-major.
    weights: Vec<Vec<f64>>,
    /// `biases[l]` has length `sizes[l+1]`.
    biases: Vec<Vec<f64>>,
}

/// Activations recorded by [`Mlp::forward`] for the backward pass.
///
/// `acts[0]` is the input, `acts[l + 1]` the post-activation output of layer
/// `l`; the last entry is the network output.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    acts: Vec<Vec<f64>>,
}

impl ForwardCache {
    /// The cached network output.
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("cache holds at least the input")
    }

    /// All cached activations, input first, output last.
    pub fn activations(&self) -> &[Vec<f64>] {
        &self.acts
    }
}

/// Per-parameter gradients, same shapes as the network they came from.
/// Fields are open data; shape-sensitive consumers validate before use.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Grads {
    /// Zero gradients shaped like `net`.
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// Multiply every entry by `factor`.
    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            for g in w {
                *g *= factor;
            }
        }
        for b in &mut self.biases {
            for g in b {
                *g *= factor;
            }
        }
    }

    fn same_shape(&self, net: &Mlp) -> bool {
        self.weights.len() == net.weights.len()
            && self
                .weights
                .iter()
                .zip(&net.weights)
                .all(|(a, b)| a.len() == b.len())
            && self
                .biases
                .iter()
                .zip(&net.biases)
                .all(|(a, b)| a.len() == b.len())
    }

    fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(self.biases.iter())
            .flatten()
            .all(|g| g.is_finite())
    }
}

impl Mlp {
    /// Freshly initialized network.
    ///
    /// Weights draw from the fan-in-scaled uniform `U(-sqrt(6 / fan_in),
    /// sqrt(6 / fan_in))`; biases start at zero. `sizes` needs at least an
    /// input and an output width, all nonzero.
    pub fn new<R: Rng>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        validate_sizes(sizes)?;
        let mut weights = Vec::with_capacity(sizes.len() - 1);
        let mut biases = Vec::with_capacity(sizes.len() - 1);
        for pair in sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = sqrt(6.0 / fan_in as f64);
            let w = (0..fan_in * fan_out)
                .map(|_| rng.gen_range(-limit..limit))
                .collect();
            weights.push(w);
            biases.push(vec![0.0; fan_out]);
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            weights,
            biases,
        })
    }

    /// Network from explicit parameters; shapes are validated.
    pub fn from_parts(
        sizes: Vec<usize>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        validate_sizes(&sizes)?;
        if weights.len() != sizes.len() - 1 || biases.len() != sizes.len() - 1 {
            return Err(Error::ShapeMismatch {
                context: "from_parts layer count",
                expected: sizes.len() - 1,
                got: weights.len().max(biases.len()),
            });
        }
        for (l, pair) in sizes.windows(2).enumerate() {
            if weights[l].len() != pair[0] * pair[1] {
                return Err(Error::ShapeMismatch {
                    context: "from_parts weights",
                    expected: pair[0] * pair[1],
                    got: weights[l].len(),
                });
            }
            if biases[l].len() != pair[1] {
                return Err(Error::ShapeMismatch {
                    context: "from_parts biases",
                    expected: pair[1],
                    got: biases[l].len(),
                });
            }
        }
        Ok(Self {
            sizes,
            weights,
            biases,
        })
    }

    /// Layer widths, `[input, hidden.., output]`.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("validated: at least two sizes")
    }

    /// Row-major `(out, in)` weights of layer `l`.
    pub fn layer_weights(&self, l: usize) -> &[f64] {
        &self.weights[l]
    }

    pub fn layer_biases(&self, l: usize) -> &[f64] {
        &self.biases[l]
    }

    /// Clone out `(sizes, weights, biases)`.
    pub fn to_parts(&self) -> (Vec<usize>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
        (
            self.sizes.clone(),
            self.weights.clone(),
            self.biases.clone(),
        )
    }

    /// Forward pass returning the output and the cache for [`Self::backward`].
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        self.check_input(input)?;
        let layers = self.weights.len();
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(input.to_vec());
        for l in 0..layers {
            let out = self.layer_forward(l, &acts[l], l + 1 < layers);
            acts.push(out);
        }
        let output = acts.last().expect("one activation per layer").clone();
        Ok((output, ForwardCache { acts }))
    }

    /// Forward pass without recording activations, for pure inference.
    pub fn value(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let layers = self.weights.len();
        let mut act = input.to_vec();
        for l in 0..layers {
            act = self.layer_forward(l, &act, l + 1 < layers);
        }
        Ok(act)
    }

    fn layer_forward(&self, l: usize, input: &[f64], relu: bool) -> Vec<f64> {
        let fan_in = self.sizes[l];
        let mut out = self.biases[l].clone();
        for (o, out_o) in out.iter_mut().enumerate() {
            let row = &self.weights[l][o * fan_in..(o + 1) * fan_in];
            *out_o += dot(row, input);
            if relu && *out_o < 0.0 {
                *out_o = 0.0;
            }
        }
        out
    }

    /// Backpropagate `output_grad` through `cache`, accumulating parameter
    /// gradients into `grads` and returning the gradient with respect to the
    /// input.
    pub fn backward_into(
        &self,
        cache: &ForwardCache,
        output_grad: &[f64],
        grads: &mut Grads,
    ) -> Result<Vec<f64>> {
        if output_grad.len() != self.output_dim() {
            return Err(Error::ShapeMismatch {
                context: "backward output grad",
                expected: self.output_dim(),
                got: output_grad.len(),
            });
        }
        if cache.acts.len() != self.weights.len() + 1 {
            return Err(Error::ShapeMismatch {
                context: "backward cache",
                expected: self.weights.len() + 1,
                got: cache.acts.len(),
            });
        }
        if !grads.same_shape(self) {
            return Err(Error::ShapeMismatch {
                context: "backward grads",
                expected: self.weights.len(),
                got: grads.weights.len(),
            });
        }
        let mut delta = output_grad.to_vec();
        for l in (0..self.weights.len()).rev() {
            let input = &cache.acts[l];
            let fan_in = self.sizes[l];
            for (o, &d) in delta.iter().enumerate() {
                grads.biases[l][o] += d;
                let row = &mut grads.weights[l][o * fan_in..(o + 1) * fan_in];
                for (g, &x) in row.iter_mut().zip(input) {
                    *g += d * x;
                }
            }
            let mut prev = vec![0.0; fan_in];
            for (o, &d) in delta.iter().enumerate() {
                let row = &self.weights[l][o * fan_in..(o + 1) * fan_in];
                for (p, &w) in prev.iter_mut().zip(row) {
                    *p += d * w;
                }
            }
            if l > 0 {
                // ReLU mask: the cached post-activation is positive exactly
                // where the pre-activation was.
                for (p, &a) in prev.iter_mut().zip(input) {
                    if a <= 0.0 {
                        *p = 0.0;
                    }
                }
            }
            delta = prev;
        }
        Ok(delta)
    }

    /// Convenience wrapper over [`Self::backward_into`] with fresh gradients.
    pub fn backward(&self, cache: &ForwardCache, output_grad: &[f64]) -> Result<(Grads, Vec<f64>)> {
        let mut grads = Grads::zeros_like(self);
        let input_grad = self.backward_into(cache, output_grad, &mut grads)?;
        Ok((grads, input_grad))
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                context: "forward input",
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        Ok(())
    }
}

/// An action-value function with exact input gradients.
///
/// Implemented by plain networks and by composite policies (encoder plus
/// switched heads). Gradient-sign attacks and local-robustness certificates
/// are generic over this trait.
pub trait QFunction {
    fn input_dim(&self) -> usize;
    fn num_actions(&self) -> usize;

    /// Q-values for every action at `input`.
    fn q_values(&self, input: &[f64]) -> Result<Vec<f64>>;

    /// Q-values plus the input gradient of `sum_a output_grad[a] * Q_a`.
    ///
    /// `output_grad = e_i - e_j` yields the gradient of a margin,
    /// `softmax(q) - e_a` the gradient of the cross-entropy attack
    /// objective.
    fn q_and_input_grad(&self, input: &[f64], output_grad: &[f64]) -> Result<(Vec<f64>, Vec<f64>)>;
}

impl QFunction for Mlp {
    fn input_dim(&self) -> usize {
        self.input_dim()
    }

    fn num_actions(&self) -> usize {
        self.output_dim()
    }

    fn q_values(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.value(input)
    }

    fn q_and_input_grad(&self, input: &[f64], output_grad: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (q, cache) = self.forward(input)?;
        let (_, input_grad) = self.backward(&cache, output_grad)?;
        Ok((q, input_grad))
    }
}

fn validate_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::InvalidConfig("network needs input and output sizes"));
    }
    if sizes.iter().any(|&s| s == 0) {
        return Err(Error::InvalidConfig("layer sizes must be nonzero"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_relative_eq;

    fn toy_net() -> Mlp {
        // [2, 2, 1]: hand-pickable numbers, one hidden ReLU layer.
        Mlp::from_parts(
            vec![2, 2, 1],
            vec![vec![1.0, -2.0, 0.5, 1.5], vec![2.0, -1.0]],
            vec![vec![0.25, -0.25], vec![0.1]],
        )
        .unwrap()
    }

    #[test]
    fn forward_matches_hand_computation() {
        let net = toy_net();
        // Hidden pre-activations: [1*0.4 - 2*0.2 + 0.25, 0.5*0.4 + 1.5*0.2 - 0.25]
        //                       = [0.25, 0.25]; both positive, ReLU passes.
        // Output: 2*0.25 - 1*0.25 + 0.1 = 0.35.
        let (out, cache) = net.forward(&[0.4, 0.2]).unwrap();
        assert_relative_eq!(out[0], 0.35, max_relative = 1e-15);
        assert_eq!(cache.output(), out.as_slice());
        assert_eq!(net.value(&[0.4, 0.2]).unwrap(), out);
    }

    #[test]
    fn forward_applies_relu_only_on_hidden_layers() {
        let net = toy_net();
        // Input pushing both hidden units negative: output = bias only.
        let (out, _) = net.forward(&[-2.0, 0.0]).unwrap();
        assert_relative_eq!(out[0], 0.1, max_relative = 1e-15);
        // A negative output must survive (identity output layer).
        let net2 = Mlp::from_parts(vec![1, 1], vec![vec![-3.0]], vec![vec![0.0]]).unwrap();
        assert_eq!(net2.value(&[1.0]).unwrap(), vec![-3.0]);
    }

    #[test]
    fn init_is_deterministic_and_fan_in_bounded() {
        let sizes = [3, 8, 2];
        let a = Mlp::new(&sizes, &mut rng::stream(11, 0)).unwrap();
        let b = Mlp::new(&sizes, &mut rng::stream(11, 0)).unwrap();
        assert_eq!(a, b);
        let c = Mlp::new(&sizes, &mut rng::stream(12, 0)).unwrap();
        assert_ne!(a, c);
        for l in 0..2 {
            let limit = sqrt(6.0 / sizes[l] as f64);
            assert!(a.layer_weights(l).iter().all(|w| w.abs() < limit));
            assert!(a.layer_biases(l).iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(
            Mlp::new(&[4], &mut rng::stream(0, 0)),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            Mlp::new(&[4, 0, 2], &mut rng::stream(0, 0)),
            Err(Error::InvalidConfig(_))
        ));
        let net = toy_net();
        assert!(matches!(
            net.forward(&[1.0]),
            Err(Error::ShapeMismatch { .. })
        ));
        let (_, cache) = net.forward(&[0.4, 0.2]).unwrap();
        assert!(matches!(
            net.backward(&cache, &[1.0, 2.0]),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    /// Central finite differences over every parameter of `net` for the
    /// scalar objective `sum(output_grad . output)`.
    fn fd_param_grads(net: &Mlp, input: &[f64], output_grad: &[f64], h: f64) -> Grads {
        let objective = |net: &Mlp| -> f64 {
            let out = net.value(input).unwrap();
            dot(&out, output_grad)
        };
        let (sizes, weights, biases) = net.to_parts();
        let mut grads = Grads::zeros_like(net);
        for l in 0..weights.len() {
            for k in 0..weights[l].len() {
                let mut wp = weights.clone();
                wp[l][k] += h;
                let plus = Mlp::from_parts(sizes.clone(), wp.clone(), biases.clone()).unwrap();
                wp[l][k] -= 2.0 * h;
                let minus = Mlp::from_parts(sizes.clone(), wp, biases.clone()).unwrap();
                grads.weights[l][k] = (objective(&plus) - objective(&minus)) / (2.0 * h);
            }
            for k in 0..biases[l].len() {
                let mut bp = biases.clone();
                bp[l][k] += h;
                let plus = Mlp::from_parts(sizes.clone(), weights.clone(), bp.clone()).unwrap();
                bp[l][k] -= 2.0 * h;
                let minus = Mlp::from_parts(sizes.clone(), weights.clone(), bp).unwrap();
                grads.biases[l][k] = (objective(&plus) - objective(&minus)) / (2.0 * h);
            }
        }
        grads
    }

    /// Pre-activations recomputed straight-line, to keep finite differences
    /// away from ReLU kinks.
    fn min_abs_preactivation(net: &Mlp, input: &[f64]) -> f64 {
        let (sizes, weights, biases) = net.to_parts();
        let mut act = input.to_vec();
        let mut min_abs = f64::INFINITY;
        for l in 0..weights.len() - 1 {
            let mut next = biases[l].clone();
            for o in 0..sizes[l + 1] {
                for i in 0..sizes[l] {
                    next[o] += weights[l][o * sizes[l] + i] * act[i];
                }
                min_abs = min_abs.min(next[o].abs());
                if next[o] < 0.0 {
                    next[o] = 0.0;
                }
            }
            act = next;
        }
        min_abs
    }

    #[test]
    fn backward_matches_central_finite_differences() {
        let net = Mlp::new(&[3, 5, 4, 2], &mut rng::stream(42, 0)).unwrap();
        let input = [0.35, -0.6, 0.9];
        let output_grad = [1.0, -0.7];
        // Seed chosen so no pre-activation sits near the ReLU kink; the
        // finite-difference step would otherwise cross it.
        assert!(min_abs_preactivation(&net, &input) > 1e-3);

        let h = 1e-5;
        let (out, cache) = net.forward(&input).unwrap();
        assert_eq!(out.len(), 2);
        let (grads, input_grad) = net.backward(&cache, &output_grad).unwrap();

        let fd = fd_param_grads(&net, &input, &output_grad, h);
        for l in 0..grads.weights.len() {
            for (a, n) in grads.weights[l].iter().zip(&fd.weights[l]) {
                assert_relative_eq!(a, n, max_relative = 1e-6, epsilon = 1e-9);
            }
            for (a, n) in grads.biases[l].iter().zip(&fd.biases[l]) {
                assert_relative_eq!(a, n, max_relative = 1e-6, epsilon = 1e-9);
            }
        }

        for i in 0..input.len() {
            let mut xp = input;
            xp[i] += h;
            let plus = dot(&net.value(&xp).unwrap(), &output_grad);
            xp[i] -= 2.0 * h;
            let minus = dot(&net.value(&xp).unwrap(), &output_grad);
            let numeric = (plus - minus) / (2.0 * h);
            assert_relative_eq!(input_grad[i], numeric, max_relative = 1e-6, epsilon = 1e-9);
        }
    }

    #[test]
    fn backward_respects_relu_mask() {
        // One hidden unit forced inactive: its incoming weights get zero grad.
        let net = Mlp::from_parts(
            vec![1, 2, 1],
            vec![vec![1.0, -1.0], vec![1.0, 1.0]],
            vec![vec![0.0, 0.0], vec![0.0]],
        )
        .unwrap();
        let (_, cache) = net.forward(&[2.0]).unwrap();
        let (grads, input_grad) = net.backward(&cache, &[1.0]).unwrap();
        // Unit 1 has pre-activation -2 -> inactive.
        assert_eq!(grads.weights[0][1], 0.0);
        assert_eq!(grads.biases[0][1], 0.0);
        // Active path only: d out / d x = w2[0] * w1[0] = 1.
        assert_relative_eq!(input_grad[0], 1.0, max_relative = 1e-15);
        // Downstream weight of the inactive unit still sees its (zero) input.
        assert_eq!(grads.weights[1][1], 0.0);
    }
}
