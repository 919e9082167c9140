use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// ADAM optimizer state for an ordered parameter list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(learning_rate: f64, params: &[&mut Tensor]) -> Self {
        AdamState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            t: 0,
            m: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
        }
    }

    /// One bias-corrected update from the gradients stored on `params`
    /// (missing gradients count as zero), then clears them. A NaN gradient
    /// aborts before any parameter changes.
    pub fn step(&mut self, mut params: Vec<&mut Tensor>, names: &[String]) -> Result<()> {
        if params.len() != self.m.len() || params.iter().zip(&self.m).any(|(p, m)| p.numel() != m.len()) {
            return Err(Error::Dimension("optimizer state does not match the parameter list".into()));
        }
        for (i, p) in params.iter().enumerate() {
            if let Some(k) = p.grad().and_then(|g| g.iter().position(|v| v.is_nan())) {
                let name = names.get(i).map_or("<unnamed>", String::as_str);
                return Err(Error::Training(format!("NaN gradient in {name} at element {k}")));
            }
        }
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let Some(grad) = p.grad().map(<[f64]>::to_vec) else {
                // all-zero gradient still decays the moments
                m.iter_mut().for_each(|x| *x *= self.beta1);
                v.iter_mut().for_each(|x| *x *= self.beta2);
                apply(p.values_mut(), m, v, self.learning_rate, c1, c2, self.epsilon);
                continue;
            };
            for ((mi, vi), g) in m.iter_mut().zip(v.iter_mut()).zip(&grad) {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * g;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * g * g;
            }
            apply(p.values_mut(), m, v, self.learning_rate, c1, c2, self.epsilon);
            p.clear_grad();
        }
        Ok(())
    }
}

fn apply(values: &mut [f64], m: &[f64], v: &[f64], lr: f64, c1: f64, c2: f64, eps: f64) {
    for ((x, mi), vi) in values.iter_mut().zip(m).zip(v) {
        *x -= lr * (mi / c1) / ((vi / c2).sqrt() + eps);
    }
}

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns whether clipping happened.
pub fn clip_gradients(params: &mut [&mut Tensor], max_norm: f64) -> bool {
    let sq: f64 = params.iter().filter_map(|p| p.grad()).flat_map(|g| g.iter()).map(|v| v * v).sum();
    let norm = sq.sqrt();
    if norm > max_norm {
        let factor = max_norm / norm;
        params.iter_mut().for_each(|p| p.scale_grad(factor));
        true
    } else {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn param(values: Vec<f64>, grad: Option<Vec<f64>>) -> Tensor {
        let mut t = Tensor::vector(values).with_requires_grad(true);
        if let Some(g) = grad {
            t.accumulate_grad(&g);
        }
        t
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = param(vec![1.0, -2.0], Some(vec![0.0, 0.0]));
        let mut adam = AdamState::new(1e-3, &[&mut p]);
        for _ in 0..3 {
            p.accumulate_grad(&[0.0, 0.0]);
            adam.step(vec![&mut p], &[]).unwrap();
        }
        assert_eq!(p.values(), &[1.0, -2.0]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        for g in [0.3, -7.0, 1e-3] {
            let mut p = param(vec![0.5], Some(vec![g]));
            let mut adam = AdamState::new(1e-3, &[&mut p]);
            adam.step(vec![&mut p], &[]).unwrap();
            // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
            let expected = 0.5 - 1e-3 * g / (g.abs() + 1e-8);
            assert!((p.values()[0] - expected).abs() < 1e-15);
            assert!(p.grad().is_none());
        }
    }

    #[test]
    fn nan_gradient_names_the_parameter() {
        let mut a = param(vec![1.0], Some(vec![0.1]));
        let mut b = param(vec![1.0, 2.0], Some(vec![0.0, f64::NAN]));
        let mut adam = AdamState::new(1e-3, &[&mut a, &mut b]);
        let err = adam.step(vec![&mut a, &mut b], &["w".into(), "u".into()]).unwrap_err();
        assert!(err.to_string().contains("u at element 1"), "{err}");
        assert_eq!(a.values(), &[1.0]);
    }

    #[test]
    fn identical_inputs_give_identical_trajectories() {
        let run = || {
            let mut p = param(vec![0.2, 0.4], None);
            let mut adam = AdamState::new(1e-2, &[&mut p]);
            for k in 0..20 {
                let x = p.values().to_vec();
                p.accumulate_grad(&[x[0] - 1.0 + k as f64 * 0.01, 2.0 * x[1]]);
                adam.step(vec![&mut p], &[]).unwrap();
            }
            p.values().to_vec()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn clipping_bounds_the_global_norm() {
        let mut a = param(vec![0.0, 0.0], Some(vec![3.0, 0.0]));
        let mut b = param(vec![0.0], Some(vec![4.0]));
        assert!(clip_gradients(&mut [&mut a, &mut b], 1.0));
        assert!((a.grad().unwrap()[0] - 0.6).abs() < 1e-15);
        assert!((b.grad().unwrap()[0] - 0.8).abs() < 1e-15);
        assert!(!clip_gradients(&mut [&mut a, &mut b], 1.0));
    }
}
