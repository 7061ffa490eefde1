//! Adaptive moment estimation with global-norm gradient clipping.

use super::params::ParamStore;
use crate::tensor::Matrix;

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub clip_norm: Option<f64>,
    t: u64,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64, clip_norm: Option<f64>) -> Self {
        let zeros: Vec<Matrix> = store.iter().map(|(_, t)| Matrix::zeros(t.rows(), t.cols())).collect();
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, clip_norm, t: 0, m: zeros.clone(), v: zeros }
    }

    /// Applies one update; `grads` follow store order. Returns the gradient
    /// norm before clipping.
    pub fn step(&mut self, store: &mut ParamStore, grads: &[Matrix]) -> f64 {
        assert_eq!(grads.len(), store.len(), "one gradient per parameter");
        let norm = grads.iter().map(|g| g.as_slice().iter().map(|x| x * x).sum::<f64>()).sum::<f64>().sqrt();
        let clip = match self.clip_norm {
            Some(max) if norm > max => max / norm,
            _ => 1.0,
        };
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (i, g) in grads.iter().enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let p = store.tensor_mut(i);
            for (((pv, &gv), mv), vv) in p
                .as_mut_slice()
                .iter_mut()
                .zip(g.as_slice())
                .zip(m.as_mut_slice())
                .zip(v.as_mut_slice())
            {
                let gv = gv * clip;
                *mv = self.beta1 * *mv + (1.0 - self.beta1) * gv;
                *vv = self.beta2 * *vv + (1.0 - self.beta2) * gv * gv;
                let mhat = *mv / bc1;
                let vhat = *vv / bc2;
                *pv -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        norm
    }
}
