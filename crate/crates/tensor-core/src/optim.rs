//! RMSProp with a plain squared-gradient accumulator.
//!
//! m ← smoothing·m + (1−smoothing)·g², param ← param − lr·g/√(m + eps).
//! Epsilon sits inside the square root; no momentum, no centering.

use std::collections::HashMap;

use crate::graph::Gradients;
use crate::tensor::Tensor;
use crate::TensorError;

pub struct RmsProp {
    pub lr: f64,
    pub smoothing: f64,
    pub eps: f64,
    accum: HashMap<u64, Vec<f64>>,
}

impl RmsProp {
    /// lr = 0 builds an inert optimizer (accumulators still decay); useful
    /// for no-update runs.
    pub fn new(params: &[Tensor], lr: f64, smoothing: f64, eps: f64) -> Result<Self, TensorError> {
        if lr < 0.0 {
            return Err(TensorError::attr("rmsprop", "lr must be >= 0"));
        }
        if !(0.0..1.0).contains(&smoothing) {
            return Err(TensorError::attr("rmsprop", "smoothing must be in [0, 1)"));
        }
        if eps <= 0.0 {
            return Err(TensorError::attr("rmsprop", "eps must be > 0"));
        }
        let accum = params
            .iter()
            .map(|p| (p.id(), vec![0.0; p.numel()]))
            .collect();
        Ok(RmsProp {
            lr,
            smoothing,
            eps,
            accum,
        })
    }

    /// Apply one update to each parameter using the gradient map. A
    /// parameter absent from `grads` decays its accumulator with zero
    /// gradient; a parameter with no registered accumulator is an error.
    pub fn step(&mut self, params: &[Tensor], grads: &Gradients) -> Result<(), TensorError> {
        let zero_grad: Vec<f64> = Vec::new();
        for p in params {
            let m = self
                .accum
                .get_mut(&p.id())
                .ok_or(TensorError::MissingAccumulator { id: p.id() })?;
            let g = grads.get(p).unwrap_or(&zero_grad);
            let mut data = p.to_vec();
            for i in 0..data.len() {
                let gi = if g.is_empty() { 0.0 } else { g[i] };
                m[i] = self.smoothing * m[i] + (1.0 - self.smoothing) * gi * gi;
                data[i] -= self.lr * gi / (m[i] + self.eps).sqrt();
            }
            p.set_data(&data)?;
        }
        Ok(())
    }

    /// Accumulator snapshot for checkpointing, keyed by parameter.
    pub fn accumulator(&self, p: &Tensor) -> Option<&[f64]> {
        self.accum.get(&p.id()).map(|v| v.as_slice())
    }

    pub fn load_accumulator(&mut self, p: &Tensor, values: Vec<f64>) -> Result<(), TensorError> {
        if values.len() != p.numel() {
            return Err(TensorError::DataLength {
                expected: p.numel(),
                got: values.len(),
            });
        }
        self.accum.insert(p.id(), values);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    fn grads_for(loss_factor: &[f64], p: &Tensor) -> Gradients {
        // Build sum(factor ⊙ p) so grad(p) = factor.
        let mut g = Graph::new();
        let f = Tensor::from_vec(&[loss_factor.len()], loss_factor.to_vec()).unwrap();
        let prod = g.mul(&f, p).unwrap();
        let loss = g.sum_all(&prod).unwrap();
        g.backward(&loss).unwrap()
    }

    #[test]
    fn first_step_magnitude_matches_hand_evaluation() {
        let p = Tensor::param(&[1], vec![0.0]).unwrap();
        let mut opt = RmsProp::new(std::slice::from_ref(&p), 0.1, 0.97, 1e-6).unwrap();
        let grads = grads_for(&[1.0], &p);
        opt.step(std::slice::from_ref(&p), &grads).unwrap();
        // m = 0.03, update = 0.1 / sqrt(0.03 + 1e-6)
        let expected = -0.1 / (0.03f64 + 1e-6).sqrt();
        assert!((p.data()[0] - expected).abs() < 1e-12);
        assert!((expected.abs() - 0.57733).abs() < 1e-4);
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let p = Tensor::param(&[3], vec![1.0, -2.0, 0.5]).unwrap();
        let mut opt = RmsProp::new(std::slice::from_ref(&p), 0.1, 0.97, 1e-6).unwrap();
        let grads = grads_for(&[0.0, 0.0, 0.0], &p);
        opt.step(std::slice::from_ref(&p), &grads).unwrap();
        assert_eq!(p.to_vec(), vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn repeated_identical_gradients_shrink_the_update() {
        let p = Tensor::param(&[1], vec![0.0]).unwrap();
        let mut opt = RmsProp::new(std::slice::from_ref(&p), 0.1, 0.97, 1e-6).unwrap();
        let grads = grads_for(&[1.0], &p);
        opt.step(std::slice::from_ref(&p), &grads).unwrap();
        let first = p.data()[0].abs();
        let before = p.data()[0];
        let grads = grads_for(&[1.0], &p);
        opt.step(std::slice::from_ref(&p), &grads).unwrap();
        let second = (p.data()[0] - before).abs();
        assert!(second < first, "second step {second} should shrink below {first}");
    }

    #[test]
    fn unregistered_param_is_an_error() {
        let p = Tensor::param(&[1], vec![0.0]).unwrap();
        let q = Tensor::param(&[1], vec![0.0]).unwrap();
        let mut opt = RmsProp::new(std::slice::from_ref(&p), 0.1, 0.97, 1e-6).unwrap();
        let grads = grads_for(&[1.0], &q);
        let err = opt.step(std::slice::from_ref(&q), &grads);
        assert!(matches!(err, Err(TensorError::MissingAccumulator { .. })));
    }
}
