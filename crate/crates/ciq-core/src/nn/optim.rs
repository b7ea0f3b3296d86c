//! Adam with decoupled weight decay, and Polyak target averaging.

use alloc::vec::Vec;

use super::{Grads, Mlp};
use crate::math::{powf, sqrt};
use crate::{Error, Result};

/// Adam hyperparameters. Defaults are the house training settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled decay: parameters shrink by `lr * weight_decay * p` before
    /// the Adam delta is applied, so decay never enters the moments.
    pub weight_decay: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            lr: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-4,
        }
    }
}

impl AdamHyper {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.weight_decay >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig("adam hyperparameters out of range"))
        }
    }
}

/// First and second moment accumulators for one network.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Grads,
    v: Grads,
    t: u64,
}

impl AdamState {
    pub fn new(net: &Mlp) -> Self {
        Self {
            m: Grads::zeros_like(net),
            v: Grads::zeros_like(net),
            t: 0,
        }
    }

    /// Steps taken so far.
    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update of `params` from `grads`.
    ///
    /// Rejects non-finite gradients without touching the parameters.
    pub fn step(&mut self, params: &mut Mlp, grads: &Grads, h: &AdamHyper) -> Result<()> {
        h.validate()?;
        if !grads.same_shape(params) || !self.m.same_shape(params) {
            return Err(Error::ShapeMismatch {
                context: "adam step",
                expected: params.weights.len(),
                got: grads.weights.len(),
            });
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite("adam gradients"));
        }
        self.t += 1;
        let bc1 = 1.0 - powf(h.beta1, self.t as f64);
        let bc2 = 1.0 - powf(h.beta2, self.t as f64);
        let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..p.len() {
                p[i] -= h.lr * h.weight_decay * p[i];
                m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
                v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= h.lr * m_hat / (sqrt(v_hat) + h.eps);
            }
        };
        for l in 0..params.weights.len() {
            update(
                &mut params.weights[l],
                &grads.weights[l],
                &mut self.m.weights[l],
                &mut self.v.weights[l],
            );
            update(
                &mut params.biases[l],
                &grads.biases[l],
                &mut self.m.biases[l],
                &mut self.v.biases[l],
            );
        }
        Ok(())
    }
}

/// Soft target update: `target = (1 - tau) * target + tau * local`.
///
/// `tau = 0` keeps the target, `tau = 1` copies the local network.
pub fn polyak_update(target: &mut Mlp, local: &Mlp, tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidConfig("polyak tau must lie in [0, 1]"));
    }
    if target.sizes != local.sizes {
        return Err(Error::ShapeMismatch {
            context: "polyak sizes",
            expected: local.sizes.len(),
            got: target.sizes.len(),
        });
    }
    let blend = |t: &mut Vec<f64>, l: &[f64]| {
        for (t_i, &l_i) in t.iter_mut().zip(l) {
            *t_i = (1.0 - tau) * *t_i + tau * l_i;
        }
    };
    for l in 0..target.weights.len() {
        blend(&mut target.weights[l], &local.weights[l]);
        blend(&mut target.biases[l], &local.biases[l]);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_relative_eq;

    fn scalar_net(w: f64) -> Mlp {
        Mlp::from_parts(vec![1, 1], vec![vec![w]], vec![vec![0.0]]).unwrap()
    }

    fn scalar_grads(net: &Mlp, g: f64) -> Grads {
        let mut grads = Grads::zeros_like(net);
        grads.weights[0][0] = g;
        grads
    }

    #[test]
    fn first_step_matches_scalar_oracle() {
        // w = 1, g = 1, lr = 0.1, no decay:
        // m_hat = v_hat = 1, so w <- 1 - 0.1 / (1 + 1e-8).
        let mut net = scalar_net(1.0);
        let mut adam = AdamState::new(&net);
        let h = AdamHyper {
            lr: 0.1,
            weight_decay: 0.0,
            ..AdamHyper::default()
        };
        let grads = scalar_grads(&net, 1.0);
        adam.step(&mut net, &grads, &h).unwrap();
        let expected = 1.0 - 0.1 / (1.0 + 1e-8);
        assert_relative_eq!(net.layer_weights(0)[0], expected, max_relative = 1e-15);
    }

    #[test]
    fn trajectory_matches_independent_scalar_loop() {
        let h = AdamHyper {
            lr: 0.05,
            weight_decay: 0.01,
            ..AdamHyper::default()
        };
        let gs = [0.3, -1.2, 0.8, 0.05, -0.4, 2.0, -0.7, 0.0, 1.1, -0.2];

        // Straight-line reference with its own accumulators.
        let mut w = 0.7;
        let (mut m, mut v) = (0.0, 0.0);
        for (k, &g) in gs.iter().enumerate() {
            let t = (k + 1) as f64;
            w -= h.lr * h.weight_decay * w;
            m = h.beta1 * m + (1.0 - h.beta1) * g;
            v = h.beta2 * v + (1.0 - h.beta2) * g * g;
            let m_hat = m / (1.0 - powf(h.beta1, t));
            let v_hat = v / (1.0 - powf(h.beta2, t));
            w -= h.lr * m_hat / (sqrt(v_hat) + h.eps);
        }

        let mut net = scalar_net(0.7);
        let mut adam = AdamState::new(&net);
        for &g in &gs {
            let grads = scalar_grads(&net, g);
            adam.step(&mut net, &grads, &h).unwrap();
        }
        assert_relative_eq!(net.layer_weights(0)[0], w, max_relative = 1e-14);
        assert_eq!(adam.steps(), 10);
    }

    #[test]
    fn zero_grads_with_decay_only_shrink() {
        let mut net = scalar_net(2.0);
        let mut adam = AdamState::new(&net);
        let h = AdamHyper {
            lr: 0.1,
            weight_decay: 0.5,
            ..AdamHyper::default()
        };
        let grads = scalar_grads(&net, 0.0);
        adam.step(&mut net, &grads, &h).unwrap();
        // Zero moments give a zero Adam delta; only decay acts.
        assert_relative_eq!(
            net.layer_weights(0)[0],
            2.0 * (1.0 - 0.1 * 0.5),
            max_relative = 1e-15
        );
    }

    #[test]
    fn non_finite_gradients_leave_parameters_untouched() {
        let mut net = scalar_net(1.0);
        let before = net.clone();
        let mut adam = AdamState::new(&net);
        let grads = scalar_grads(&net, f64::NAN);
        let err = adam
            .step(&mut net, &grads, &AdamHyper::default())
            .unwrap_err();
        assert_eq!(err, Error::NonFinite("adam gradients"));
        assert_eq!(net, before);
        assert_eq!(adam.steps(), 0);
    }

    #[test]
    fn polyak_endpoints_and_blend() {
        let local = Mlp::new(&[2, 3, 1], &mut rng::stream(5, 0)).unwrap();
        let init = Mlp::new(&[2, 3, 1], &mut rng::stream(6, 0)).unwrap();

        let mut target = init.clone();
        polyak_update(&mut target, &local, 0.0).unwrap();
        assert_eq!(target, init);

        let mut target = init.clone();
        polyak_update(&mut target, &local, 1.0).unwrap();
        assert_eq!(target, local);

        let mut target = init.clone();
        polyak_update(&mut target, &local, 0.005).unwrap();
        let expected = 0.995 * init.layer_weights(0)[0] + 0.005 * local.layer_weights(0)[0];
        assert_relative_eq!(target.layer_weights(0)[0], expected, max_relative = 1e-15);
    }

    #[test]
    fn polyak_rejects_bad_tau_and_shapes() {
        let local = Mlp::new(&[2, 3, 1], &mut rng::stream(5, 0)).unwrap();
        let mut target = local.clone();
        assert!(matches!(
            polyak_update(&mut target, &local, -0.1),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            polyak_update(&mut target, &local, 1.1),
            Err(Error::InvalidConfig(_))
        ));
        let mut wrong = Mlp::new(&[2, 4, 1], &mut rng::stream(5, 0)).unwrap();
        assert!(matches!(
            polyak_update(&mut wrong, &local, 0.5),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}
