//! Minimal dense-network machinery: layers with exact backward passes, the
//! bounded angle map feeding the encoding layer, the weighted multi-target
//! loss, and an Adam optimizer over flat parameter vectors.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative at pre-activation `z` (ReLU takes 0 at z = 0).
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - z.tanh().powi(2),
            Activation::Identity => 1.0,
        }
    }
}

/// Dense layer `y = act(W x + b)` with row-major weights (out x in).
#[derive(Debug, Clone)]
pub struct DenseLayer {
    pub out_dim: usize,
    pub in_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn zeros(out_dim: usize, in_dim: usize, activation: Activation) -> Self {
        DenseLayer {
            out_dim,
            in_dim,
            weights: vec![0.0; out_dim * in_dim],
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    /// Uniform init in ±sqrt(6 / (fan_in + fan_out)), zero bias.
    pub fn glorot<R: Rng>(
        out_dim: usize,
        in_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = (0..out_dim * in_dim)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        DenseLayer {
            out_dim,
            in_dim,
            weights,
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    pub fn num_params(&self) -> usize {
        self.out_dim * self.in_dim + self.out_dim
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.in_dim {
            return Err(Error::Contract(format!(
                "layer expects input of {}, got {}",
                self.in_dim,
                x.len()
            )));
        }
        Ok(())
    }

    fn pre_activation(&self, x: &[f64]) -> Vec<f64> {
        (0..self.out_dim)
            .map(|o| {
                let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
                row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + self.bias[o]
            })
            .collect()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self
            .pre_activation(x)
            .into_iter()
            .map(|z| self.activation.apply(z))
            .collect())
    }

    /// Exact gradients: given dL/dy returns (dL/dx, dL/dW, dL/db).
    pub fn backward(&self, x: &[f64], grad_out: &[f64]) -> Result<LayerGradients> {
        self.check_input(x)?;
        if grad_out.len() != self.out_dim {
            return Err(Error::Contract(format!(
                "layer gradient expects {}, got {}",
                self.out_dim,
                grad_out.len()
            )));
        }
        let z = self.pre_activation(x);
        let delta: Vec<f64> = z
            .iter()
            .zip(grad_out)
            .map(|(&zi, &g)| g * self.activation.derivative(zi))
            .collect();
        let mut grad_weights = vec![0.0; self.out_dim * self.in_dim];
        for o in 0..self.out_dim {
            for i in 0..self.in_dim {
                grad_weights[o * self.in_dim + i] = delta[o] * x[i];
            }
        }
        let grad_input: Vec<f64> = (0..self.in_dim)
            .map(|i| {
                (0..self.out_dim)
                    .map(|o| delta[o] * self.weights[o * self.in_dim + i])
                    .sum()
            })
            .collect();
        Ok(LayerGradients {
            input: grad_input,
            weights: grad_weights,
            bias: delta,
        })
    }
}

#[derive(Debug, Clone)]
pub struct LayerGradients {
    pub input: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Keep tanh strictly inside (-1, 1) so the angle map never reaches ±π.
const TANH_CEILING: f64 = 1.0 - f64::EPSILON / 2.0;

/// Bounded angle map θ = π tanh(h) with its derivative π (1 - tanh²(h)).
///
/// Output stays strictly inside (-π, π) even where tanh saturates to 1 in
/// floating point.
pub fn bounded_angle_map(h: &[f64; 4]) -> ([f64; 4], [f64; 4]) {
    let mut theta = [0.0; 4];
    let mut deriv = [0.0; 4];
    for i in 0..4 {
        let t = h[i].tanh();
        let clamped = t.clamp(-TANH_CEILING, TANH_CEILING);
        theta[i] = std::f64::consts::PI * clamped;
        deriv[i] = std::f64::consts::PI * (1.0 - t * t);
    }
    (theta, deriv)
}

/// Per-target weights of the multi-target loss. All strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 6]", into = "[f64; 6]")]
pub struct LossWeights([f64; 6]);

impl LossWeights {
    pub fn new(w: [f64; 6]) -> Result<Self> {
        if w.iter().any(|&x| x <= 0.0 || !x.is_finite()) {
            return Err(Error::Config(format!(
                "loss weights must be positive and finite, got {w:?}"
            )));
        }
        Ok(LossWeights(w))
    }

    pub fn uniform() -> Self {
        LossWeights([1.0; 6])
    }

    pub fn values(&self) -> &[f64; 6] {
        &self.0
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights::uniform()
    }
}

impl TryFrom<[f64; 6]> for LossWeights {
    type Error = Error;
    fn try_from(w: [f64; 6]) -> Result<Self> {
        LossWeights::new(w)
    }
}

impl From<LossWeights> for [f64; 6] {
    fn from(w: LossWeights) -> [f64; 6] {
        w.0
    }
}

/// Weighted multi-target MSE `L = (1/T) Σ w_t (ŷ_t - y_t)²` and its gradient
/// `dL/dŷ_t = 2 w_t (ŷ_t - y_t) / T`.
pub fn weighted_mse(pred: &[f64; 6], target: &[f64; 6], w: &LossWeights) -> (f64, [f64; 6]) {
    let t = 6.0;
    let mut loss = 0.0;
    let mut grad = [0.0; 6];
    for i in 0..6 {
        let d = pred[i] - target[i];
        loss += w.values()[i] * d * d / t;
        grad[i] = 2.0 * w.values()[i] * d / t;
    }
    (loss, grad)
}

/// Adam over one flat parameter vector, with bias correction.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(len: usize, learning_rate: f64) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Contract(format!(
                "optimizer holds {} moments, got {} params / {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}
