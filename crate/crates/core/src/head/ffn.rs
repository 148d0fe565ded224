use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    /// Linear; makes the network a plain affine map. Useful in tests.
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation output `y = f(x)`.
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

/// Two affine layers, `d -> d_h -> d`, with an activation in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfnParams {
    /// `d_h × d`
    pub w1: Matrix,
    pub b1: Vec<f64>,
    /// `d × d_h`
    pub w2: Matrix,
    pub b2: Vec<f64>,
    pub activation: Activation,
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct FfnTrace {
    pub hidden: Vec<f64>,
    pub output: Vec<f64>,
}

impl FfnParams {
    pub fn zeros(d: usize, d_h: usize, activation: Activation) -> Self {
        Self { w1: Matrix::zeros(d_h, d), b1: vec![0.0; d_h], w2: Matrix::zeros(d, d_h), b2: vec![0.0; d], activation }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            w1: Matrix::identity(d),
            b1: vec![0.0; d],
            w2: Matrix::identity(d),
            b2: vec![0.0; d],
            activation: Activation::Identity,
        }
    }

    /// Entries uniform in `[-scale, scale]`.
    pub fn random(d: usize, d_h: usize, scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(d, d_h, Activation::Tanh);
        for v in p.values_mut() {
            *v = rng.random_range(-scale..=scale);
        }
        p
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn shapes_consistent(&self) -> bool {
        let (d, d_h) = (self.input_dim(), self.hidden_dim());
        self.b1.len() == d_h && self.w2.rows() == d && self.w2.cols() == d_h && self.b2.len() == d
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    pub fn forward(&self, h: &[f64]) -> FfnTrace {
        let mut hidden = self.w1.mul_vec(h);
        for (v, b) in hidden.iter_mut().zip(&self.b1) {
            *v = self.activation.apply(*v + b);
        }
        let mut output = self.w2.mul_vec(&hidden);
        for (v, b) in output.iter_mut().zip(&self.b2) {
            *v += b;
        }
        FfnTrace { hidden, output }
    }

    pub fn apply(&self, h: &[f64]) -> Vec<f64> {
        self.forward(h).output
    }

    /// Parameters in the fixed order `w1, b1, w2, b2`.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.w1.as_slice().iter().chain(&self.b1).chain(self.w2.as_slice()).chain(&self.b2).copied()
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1
            .as_mut_slice()
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.as_mut_slice().iter_mut())
            .chain(self.b2.iter_mut())
    }

    pub fn param_count(&self) -> usize {
        self.values().count()
    }

    /// `self += alpha · other`.
    pub fn axpy(&mut self, alpha: f64, other: &FfnParams) {
        for (v, o) in self.values_mut().zip(other.values()) {
            *v += alpha * o;
        }
    }
}
