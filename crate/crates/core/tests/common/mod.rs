#![allow(dead_code)]

use std::sync::Arc;

use ldrate::{Coefficients, GridPath, Model};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// 2-D model with nonlinear drift and state-dependent, non-diagonal σ.
pub struct Twisted;

const OFF: f64 = 0.2;

fn diag(x: &[f64]) -> (f64, f64) {
    (1.5 + 0.5 * x[0].sin(), 1.5 + 0.5 * x[1].cos())
}

impl Coefficients for Twisted {
    fn dim(&self) -> usize {
        2
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = -x[0] + 0.5 * x[1].sin();
        out[1] = -x[1] + 0.3 * x[0].cos();
    }
    fn drift_jacobian(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&[-1.0, 0.5 * x[1].cos(), -0.3 * x[0].sin(), -1.0]);
    }
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        let (a, b) = diag(x);
        out.copy_from_slice(&[a, OFF, 0.0, b]);
    }
    fn diffusion_inverse(&self, x: &[f64], out: &mut [f64]) {
        let (a, b) = diag(x);
        out.copy_from_slice(&[1.0 / a, -OFF / (a * b), 0.0, 1.0 / b]);
    }
    fn diffusion_partial(&self, x: &[f64], k: usize, out: &mut [f64]) {
        out.fill(0.0);
        if k == 0 {
            out[0] = 0.5 * x[0].cos();
        } else {
            out[3] = -0.5 * x[1].sin();
        }
    }
}

pub fn twisted() -> Model {
    Model::new("twisted", 3.0, false, Arc::new(Twisted)).unwrap()
}

/// All built-in names exercised by the property tests, plus the custom model.
pub fn models() -> Vec<Model> {
    let mut v: Vec<Model> = ["brownian", "brownian(2)", "ou-additive(-1)", "ou-additive(0.5)", "mult-sine"]
        .iter()
        .map(|n| ldrate::builtin_model(n).unwrap().model)
        .collect();
    v.push(twisted());
    v
}

pub fn random_path(rng: &mut ChaCha8Rng, dim: usize, t_end: f64, steps: usize, scale: f64) -> GridPath {
    let nodes = (0..(steps + 1) * dim)
        .map(|_| rng.random_range(-scale..scale))
        .collect();
    GridPath::new(t_end, steps, dim, nodes).unwrap()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
