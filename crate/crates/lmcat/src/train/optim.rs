//! AdamW with decoupled weight decay, from scratch.
//!
//! Decay is applied directly to the weights (`θ *= 1 − α·λ`), never through
//! the gradients, so with zero gradients parameters shrink by exactly that
//! factor per step. With `weight_decay = 0` the update is plain Adam. The
//! step is a pure function of `(params, grads, state, hyperparameters)`:
//! replaying a recorded gradient sequence reproduces final weights
//! bit-exactly.

use crate::error::{Error, Result};
use crate::model::ParamEntry;
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl AdamHyper {
    /// Contrastive pretraining defaults: AdamW at `α = 3e-4`.
    pub fn pretrain() -> Self {
        Self {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }

    /// Head fine-tuning defaults: Adam at `α = 1e-3` (no decay).
    pub fn finetune() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }

    pub fn with_lr(mut self, lr: f64) -> Self {
        self.lr = lr;
        self
    }
}

/// Single-tensor AdamW update at step `t` (1-based, for bias correction).
pub fn adamw_update<T: Scalar>(
    param: &mut [T],
    grad: &[T],
    m: &mut [T],
    v: &mut [T],
    t: u64,
    hyper: &AdamHyper,
) {
    let lr = T::from_f64(hyper.lr);
    let b1 = T::from_f64(hyper.beta1);
    let b2 = T::from_f64(hyper.beta2);
    let one_m_b1 = T::from_f64(1.0 - hyper.beta1);
    let one_m_b2 = T::from_f64(1.0 - hyper.beta2);
    let eps = T::from_f64(hyper.eps);
    let decay = T::from_f64(1.0 - hyper.lr * hyper.weight_decay);
    let bc1 = T::from_f64(1.0 / (1.0 - hyper.beta1.powi(t as i32)));
    let bc2 = T::from_f64(1.0 / (1.0 - hyper.beta2.powi(t as i32)));
    for i in 0..param.len() {
        let g = grad[i];
        param[i] *= decay;
        m[i] = b1 * m[i] + one_m_b1 * g;
        v[i] = b2 * v[i] + one_m_b2 * g * g;
        let m_hat = m[i] * bc1;
        let v_hat = v[i] * bc2;
        param[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Per-parameter first/second moment buffers plus the shared step counter.
/// Moments are allocated lazily for the parameters that actually train.
#[derive(Clone, Debug)]
pub struct OptimState<T: Scalar> {
    pub step: u64,
    moments: Vec<Option<(Tensor<T>, Tensor<T>)>>,
}

impl<T: Scalar> OptimState<T> {
    pub fn new(n_params: usize) -> Self {
        Self {
            step: 0,
            moments: vec![None; n_params],
        }
    }

    /// One optimizer step over the trainable subset. `grads` and `trainable`
    /// are aligned with the model's parameter order. A non-finite gradient
    /// aborts with the parameter's name.
    pub fn step(
        &mut self,
        hyper: &AdamHyper,
        params: &mut [ParamEntry<T>],
        grads: &[Tensor<T>],
        trainable: &[bool],
    ) -> Result<()> {
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), trainable.len());
        self.step += 1;
        for i in 0..params.len() {
            if !trainable[i] {
                continue;
            }
            if !grads[i].all_finite() {
                return Err(Error::NonFinite {
                    context: format!("gradient of {}", params[i].name),
                });
            }
            let (m, v) = self.moments[i].get_or_insert_with(|| {
                let shape = params[i].tensor.shape().to_vec();
                (Tensor::zeros(shape.clone()), Tensor::zeros(shape))
            });
            adamw_update(
                params[i].tensor.data_mut(),
                grads[i].data(),
                m.data_mut(),
                v.data_mut(),
                self.step,
                hyper,
            );
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_kernel(param: f64, grads: &[f64], hyper: &AdamHyper) -> f64 {
        let mut p = [param];
        let mut m = [0.0];
        let mut v = [0.0];
        for (t, &g) in grads.iter().enumerate() {
            adamw_update(&mut p, &[g], &mut m, &mut v, t as u64 + 1, hyper);
        }
        p[0]
    }

    #[test]
    fn zero_grad_shrinks_by_decoupled_decay_exactly() {
        let hyper = AdamHyper {
            lr: 0.1,
            weight_decay: 0.05,
            ..AdamHyper::pretrain()
        };
        let got = run_kernel(2.0, &[0.0], &hyper);
        assert_eq!(got, 2.0 * (1.0 - 0.1 * 0.05));
    }

    #[test]
    fn first_step_is_sign_scaled() {
        // bias correction makes m̂ = g and v̂ = g², so the update is
        // −lr·g/(|g| + eps)
        let hyper = AdamHyper {
            lr: 0.01,
            weight_decay: 0.0,
            ..AdamHyper::pretrain()
        };
        for g in [0.5f64, -2.0, 1e-3] {
            let got = run_kernel(1.0, &[g], &hyper);
            let expect = 1.0 - 0.01 * g / (g.abs() + 1e-8);
            assert!((got - expect).abs() < 1e-12, "g={g}: {got} vs {expect}");
        }
    }

    #[test]
    fn quadratic_descent_reaches_near_zero() {
        // f(w) = w², grad = 2w, 200 steps from w = 1 at lr 0.1
        let hyper = AdamHyper {
            lr: 0.1,
            weight_decay: 0.0,
            ..AdamHyper::pretrain()
        };
        let mut p = [1.0f64];
        let mut m = [0.0];
        let mut v = [0.0];
        for t in 1..=200u64 {
            let g = [2.0 * p[0]];
            adamw_update(&mut p, &g, &mut m, &mut v, t, &hyper);
        }
        assert!(p[0].abs() < 1e-2, "w = {}", p[0]);
    }

    #[test]
    fn zero_decay_matches_plain_adam() {
        // hand-rolled Adam reference without any decay term
        let hyper = AdamHyper {
            lr: 0.02,
            weight_decay: 0.0,
            ..AdamHyper::pretrain()
        };
        let grads = [0.3, -0.2, 0.9, 0.05];
        let got = run_kernel(0.7, &grads, &hyper);

        let (mut p, mut m, mut v) = (0.7f64, 0.0f64, 0.0f64);
        for (i, &g) in grads.iter().enumerate() {
            let t = i as f64 + 1.0;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powf(t));
            let vh = v / (1.0 - 0.999f64.powf(t));
            p -= 0.02 * mh / (vh.sqrt() + 1e-8);
        }
        assert!((got - p).abs() < 1e-12);
    }

    #[test]
    fn replay_reproduces_weights_bit_exactly() {
        let hyper = AdamHyper::pretrain();
        let grads = [0.1f64, -0.4, 0.2, 0.0, 0.7];
        let a = run_kernel(1.5, &grads, &hyper);
        let b = run_kernel(1.5, &grads, &hyper);
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
