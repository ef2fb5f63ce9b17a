//! Adam optimizer.

use std::collections::BTreeMap;

use super::array::Array;
use super::params::ParamSet;
use crate::error::{contract, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    moments: BTreeMap<String, (Array, Array)>,
}

impl AdamState {
    /// Adam with `β1 = 0.9`, `β2 = 0.999`, `ε = 1e-8`.
    pub fn new(lr: f64) -> Self {
        Self::with_betas(lr, 0.9, 0.999)
    }

    pub fn with_betas(lr: f64, beta1: f64, beta2: f64) -> Self {
        AdamState {
            lr,
            beta1,
            beta2,
            eps: 1e-8,
            step: 0,
            moments: BTreeMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one bias-corrected update to every entry of `params`, then
    /// clears their gradients. Every entry must carry a gradient.
    pub fn step(&mut self, params: &mut ParamSet) -> Result<()> {
        for (name, p) in params.iter() {
            let g = p
                .grad
                .as_ref()
                .ok_or_else(|| Error::Contract(format!("parameter {name:?} has no gradient")))?;
            contract!(
                g.dims() == p.value.dims(),
                "gradient shape {} differs from parameter {name:?} shape {}",
                g.shape(),
                p.value.shape()
            );
            if let Some((m, _)) = self.moments.get(name) {
                contract!(
                    m.dims() == p.value.dims(),
                    "moment shape mismatch for {name:?}"
                );
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for (name, p) in params.iter_mut() {
            let g = p.grad.take().expect("checked above");
            let (m, v) = self.moments.entry(name.clone()).or_insert_with(|| {
                let z = Array::zeros(p.value.dims()).expect("valid dims");
                (z.clone(), z)
            });
            let (md, vd) = (m.data_mut(), v.data_mut());
            for (k, w) in p.value.data_mut().iter_mut().enumerate() {
                let gk = g.data()[k];
                md[k] = b1 * md[k] + (1.0 - b1) * gk;
                vd[k] = b2 * vd[k] + (1.0 - b2) * gk * gk;
                let mhat = md[k] / bc1;
                let vhat = vd[k] / bc2;
                *w -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
