//! Deterministic stand-in encoder.
//!
//! Each token is embedded by hashing its string with the seed into `d`
//! values in `[-1, 1]`, a fixed sinusoidal position vector is added, and one
//! pass of width-3 local averaging mixes neighbouring positions. Entries are
//! therefore bounded by 2 in absolute value.

use std::collections::HashMap;

use super::encoding::InputEncoding;
use super::matrix::Matrix;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// FNV-1a, stable across platforms and runs.
pub fn stable_hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}

pub fn token_embedding(token: &str, d: usize, seed: u64) -> Vec<f64> {
    let base = splitmix64(stable_hash(token) ^ splitmix64(seed));
    (0..d)
        .map(|k| {
            let bits = splitmix64(base.wrapping_add(k as u64)) >> 11;
            bits as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        })
        .collect()
}

pub fn position_vector(pos: usize, d: usize) -> Vec<f64> {
    (0..d)
        .map(|k| {
            let rate = 10000f64.powf((2 * (k / 2)) as f64 / d as f64);
            let angle = pos as f64 / rate;
            if k % 2 == 0 {
                angle.sin()
            } else {
                angle.cos()
            }
        })
        .collect()
}

/// Row `i` becomes the mean of rows `i-1, i, i+1` that exist.
pub fn local_average(rows: &Matrix) -> Matrix {
    let m = rows.rows();
    let mut out = Matrix::zeros(m, rows.cols());
    for i in 0..m {
        let lo = i.saturating_sub(1);
        let hi = (i + 1).min(m.saturating_sub(1));
        let w = 1.0 / (hi - lo + 1) as f64;
        for k in lo..=hi {
            for (o, v) in out.row_mut(i).iter_mut().zip(rows.row(k)) {
                *o += w * v;
            }
        }
    }
    out
}

/// Adjoint of [`local_average`]: maps `dL/d(output)` to `dL/d(input)`.
pub fn local_average_backward(grad: &Matrix) -> Matrix {
    let m = grad.rows();
    let mut out = Matrix::zeros(m, grad.cols());
    for i in 0..m {
        let lo = i.saturating_sub(1);
        let hi = (i + 1).min(m.saturating_sub(1));
        let w = 1.0 / (hi - lo + 1) as f64;
        for k in lo..=hi {
            for (o, v) in out.row_mut(k).iter_mut().zip(grad.row(i)) {
                *o += w * v;
            }
        }
    }
    out
}

fn pre_average(tokens: &[String], d: usize, mut embed: impl FnMut(&str) -> Vec<f64>) -> Matrix {
    let mut m = Matrix::zeros(tokens.len(), d);
    for (i, t) in tokens.iter().enumerate() {
        let e = embed(t);
        for ((o, a), b) in m.row_mut(i).iter_mut().zip(&e).zip(position_vector(i, d)) {
            *o = a + b;
        }
    }
    m
}

pub fn toy_encode(encoding: &InputEncoding, d: usize, seed: u64) -> Matrix {
    local_average(&pre_average(&encoding.tokens, d, |t| token_embedding(t, d, seed)))
}

/// Trainable embedding table initialised from the hashed embeddings.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    pub dim: usize,
    pub seed: u64,
    rows: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self { dim, seed, rows: HashMap::new() }
    }

    pub fn get(&mut self, token: &str) -> &mut Vec<f64> {
        let (dim, seed) = (self.dim, self.seed);
        self.rows.entry(token.to_string()).or_insert_with(|| token_embedding(token, dim, seed))
    }

    pub fn encode(&mut self, tokens: &[String]) -> Matrix {
        let d = self.dim;
        local_average(&pre_average(tokens, d, |t| self.get(t).clone()))
    }

    /// Applies `row -= lr · dL/dH` routed back to each token's embedding.
    pub fn step(&mut self, tokens: &[String], grad_hidden: &Matrix, lr: f64) {
        let g = local_average_backward(grad_hidden);
        for (i, t) in tokens.iter().enumerate() {
            for (v, gv) in self.get(t).iter_mut().zip(g.row(i)) {
                *v -= lr * gv;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}
