//! First-order optimizers, selectable by name.

use serde_json::Value;

use super::network::EncoderParams;
use crate::error::Result;
use crate::registry::{param_f64, Registry};

pub trait Optimizer: Send {
    fn name(&self) -> &'static str;
    fn step(&mut self, params: &mut EncoderParams, grads: &EncoderParams);
}

/// Adaptive moments. `beta1` plays the role of the momentum parameter.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }
}

fn state_like(params: &EncoderParams) -> Vec<Vec<f64>> {
    params.tensors().iter().map(|t| vec![0.0; t.len()]).collect()
}

impl Optimizer for Adam {
    fn name(&self) -> &'static str {
        "adam"
    }

    fn step(&mut self, params: &mut EncoderParams, grads: &EncoderParams) {
        if self.m.is_empty() {
            self.m = state_like(params);
            self.v = state_like(params);
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                p[i] -= self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + self.eps);
            }
        }
    }
}

/// Heavy-ball SGD: `v = mu v + g; p -= lr v`.
#[derive(Debug, Clone)]
pub struct Momentum {
    pub lr: f64,
    pub momentum: f64,
    vel: Vec<Vec<f64>>,
}

impl Momentum {
    pub fn new(lr: f64, momentum: f64) -> Self {
        Self {
            lr,
            momentum,
            vel: Vec::new(),
        }
    }
}

impl Optimizer for Momentum {
    fn name(&self) -> &'static str {
        "momentum"
    }

    fn step(&mut self, params: &mut EncoderParams, grads: &EncoderParams) {
        if self.vel.is_empty() {
            self.vel = state_like(params);
        }
        for ((p, g), v) in params.tensors_mut().into_iter().zip(grads.tensors()).zip(&mut self.vel) {
            for i in 0..p.len() {
                v[i] = self.momentum * v[i] + g[i];
                p[i] -= self.lr * v[i];
            }
        }
    }
}

fn build_adam(p: &Value) -> Result<Box<dyn Optimizer>> {
    Ok(Box::new(Adam::new(
        param_f64(p, "lr", 0.002)?,
        param_f64(p, "momentum", 0.5)?,
        param_f64(p, "beta2", 0.999)?,
        param_f64(p, "eps", 1e-8)?,
    )))
}

fn build_momentum(p: &Value) -> Result<Box<dyn Optimizer>> {
    Ok(Box::new(Momentum::new(param_f64(p, "lr", 0.002)?, param_f64(p, "momentum", 0.5)?)))
}

/// `"adam"` and `"momentum"`; both read `lr` and `momentum`.
pub fn optimizer_registry() -> Registry<dyn Optimizer> {
    Registry::new("optimizer")
        .with("adam", build_adam)
        .with("momentum", build_momentum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn quadratic_descends(opt: &mut dyn Optimizer) {
        // minimise sum(w^2) from w = 1
        let mut p = EncoderParams::zeros(&[2, 2]);
        p.layers[0].w.fill(1.0);
        let start = p.layers[0].w.sum();
        for _ in 0..50 {
            let mut g = EncoderParams::zeros(&[2, 2]);
            g.layers[0].w = &p.layers[0].w * 2.0;
            opt.step(&mut p, &g);
        }
        assert!(p.layers[0].w.sum() < start);
    }

    #[test]
    fn registry_builds_both() {
        let reg = optimizer_registry();
        assert_eq!(reg.names().collect::<Vec<_>>(), vec!["adam", "momentum"]);
        for name in ["adam", "momentum"] {
            let mut o = reg.build(name, &json!({"lr": 0.01})).unwrap();
            assert_eq!(o.name(), name);
            quadratic_descends(o.as_mut());
        }
        assert!(reg.build("rmsprop", &json!({})).is_err());
    }

    #[test]
    fn adam_first_step_is_lr_sized() {
        let mut p = EncoderParams::zeros(&[1, 1]);
        let mut g = EncoderParams::zeros(&[1, 1]);
        g.layers[0].w[[0, 0]] = 3.0;
        Adam::new(0.1, 0.5, 0.999, 0.0).step(&mut p, &g);
        assert!((p.layers[0].w[[0, 0]] + 0.1).abs() < 1e-12);
    }
}
