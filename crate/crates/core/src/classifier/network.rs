//! Encoder features -> tanh hidden layers -> per-tag scores.
//!
//! All weights live in one flat vector. Layer `l` maps `dims[l]` inputs to
//! `dims[l + 1]` outputs; its weight block is stored input-major
//! (`w[i * out + o]`) followed by `out` biases, so a sparse input row only
//! touches contiguous memory.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoder::{Encoder, EncoderSpec, Features};
use crate::math::{log_sum_exp, sigmoid, softplus};

/// Training objective over the score layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Softmax cross-entropy against exactly one tag.
    SingleLabel,
    /// Sum over tags of binary cross-entropy on logistic outputs.
    MultiLabel,
}

/// An encoded example with the indices of its gold tags.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedExample {
    pub features: Features,
    pub tags: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub encoder: EncoderSpec,
    /// `[input width, hidden..., tag count]`
    pub dims: Vec<usize>,
    pub params: Vec<f64>,
}

struct Activations {
    /// Post-activation outputs per layer; the last entry is the raw scores.
    layers: Vec<Vec<f64>>,
}

impl Network {
    /// Xavier-uniform weights and zero biases from a seeded generator.
    pub fn init(encoder: EncoderSpec, hidden: &[usize], tag_count: usize, seed: u64) -> Self {
        let mut dims = vec![encoder.width()];
        dims.extend_from_slice(hidden);
        dims.push(tag_count);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(param_count(&dims));
        for w in dims.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let limit = libm::sqrt(6.0 / (n_in + n_out).max(1) as f64);
            params.extend((0..n_in * n_out).map(|_| rng.random_range(-limit..limit)));
            params.extend(core::iter::repeat_n(0.0, n_out));
        }
        Network { encoder, dims, params }
    }

    pub fn tag_count(&self) -> usize {
        *self.dims.last().expect("at least two dims")
    }

    fn offsets(&self) -> Vec<usize> {
        let mut offs = Vec::with_capacity(self.dims.len());
        let mut at = 0;
        for w in self.dims.windows(2) {
            offs.push(at);
            at += w[0] * w[1] + w[1];
        }
        offs
    }

    fn forward(&self, x: &Features) -> Activations {
        let offs = self.offsets();
        let n_layers = self.dims.len() - 1;
        let mut layers: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let w = &self.params[offs[l]..offs[l] + n_in * n_out];
            let b = &self.params[offs[l] + n_in * n_out..offs[l] + n_in * n_out + n_out];
            let mut z = b.to_vec();
            let mut add = |i: usize, xi: f64| {
                let row = &w[i * n_out..(i + 1) * n_out];
                z.iter_mut().zip(row).for_each(|(zo, wo)| *zo += xi * wo);
            };
            if l == 0 {
                x.for_each(&mut add);
            } else {
                layers[l - 1].iter().enumerate().for_each(|(i, &xi)| add(i, xi));
            }
            if l + 1 < n_layers {
                z.iter_mut().for_each(|v| *v = libm::tanh(*v));
            }
            layers.push(z);
        }
        Activations { layers }
    }

    /// Raw per-tag scores (logits).
    pub fn logits(&self, input: &str) -> Vec<f64> {
        self.forward(&self.encoder.encode(input)).layers.pop().expect("non-empty")
    }

    fn example_loss(logits: &[f64], tags: &[usize], objective: Objective) -> f64 {
        match objective {
            Objective::MultiLabel => logits
                .iter()
                .enumerate()
                .map(|(t, &z)| softplus(z) - if tags.contains(&t) { z } else { 0.0 })
                .sum(),
            Objective::SingleLabel => log_sum_exp(logits) - logits[tags[0]],
        }
    }

    /// Mean loss over the batch.
    pub fn loss(&self, batch: &[PreparedExample], objective: Objective) -> f64 {
        let total: f64 = batch
            .iter()
            .map(|ex| {
                let a = self.forward(&ex.features);
                Self::example_loss(a.layers.last().expect("non-empty"), &ex.tags, objective)
            })
            .sum();
        total / batch.len().max(1) as f64
    }

    /// Mean loss and its gradient with respect to `params`, by
    /// backpropagation.
    pub fn loss_and_gradient(&self, batch: &[PreparedExample], objective: Objective) -> (f64, Vec<f64>) {
        let offs = self.offsets();
        let n_layers = self.dims.len() - 1;
        let mut grad = vec![0.0; self.params.len()];
        let mut total = 0.0;
        let scale = 1.0 / batch.len().max(1) as f64;
        for ex in batch {
            let act = self.forward(&ex.features);
            let logits = act.layers.last().expect("non-empty");
            total += Self::example_loss(logits, &ex.tags, objective);

            let mut delta: Vec<f64> = match objective {
                Objective::MultiLabel => logits
                    .iter()
                    .enumerate()
                    .map(|(t, &z)| sigmoid(z) - if ex.tags.contains(&t) { 1.0 } else { 0.0 })
                    .collect(),
                Objective::SingleLabel => {
                    let lse = log_sum_exp(logits);
                    logits
                        .iter()
                        .enumerate()
                        .map(|(t, &z)| libm::exp(z - lse) - if t == ex.tags[0] { 1.0 } else { 0.0 })
                        .collect()
                }
            };
            delta.iter_mut().for_each(|d| *d *= scale);

            for l in (0..n_layers).rev() {
                let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
                let w_off = offs[l];
                let b_off = w_off + n_in * n_out;
                for (o, &d) in delta.iter().enumerate() {
                    grad[b_off + o] += d;
                }
                let acc = |i: usize, xi: f64, grad: &mut [f64]| {
                    let row = &mut grad[w_off + i * n_out..w_off + (i + 1) * n_out];
                    row.iter_mut().zip(&delta).for_each(|(g, d)| *g += xi * d);
                };
                if l == 0 {
                    ex.features.for_each(|i, xi| acc(i, xi, &mut grad));
                    break;
                }
                let input = &act.layers[l - 1];
                for (i, &xi) in input.iter().enumerate() {
                    acc(i, xi, &mut grad);
                }
                let w = &self.params[w_off..b_off];
                delta = input
                    .iter()
                    .enumerate()
                    .map(|(i, &a)| {
                        let back: f64 = w[i * n_out..(i + 1) * n_out].iter().zip(&delta).map(|(w, d)| w * d).sum();
                        back * (1.0 - a * a)
                    })
                    .collect();
            }
        }
        (total * scale, grad)
    }
}

pub(crate) fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// Adam with the usual defaults (beta1 0.9, beta2 0.999, eps 1e-8).
pub(crate) struct Adam {
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    pub(crate) fn new(lr: f64, n: usize) -> Self {
        Adam { lr, m: vec![0.0; n], v: vec![0.0; n], step: 0 }
    }

    pub(crate) fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.step += 1;
        let c1 = 1.0 - libm::pow(B1, self.step as f64);
        let c2 = 1.0 - libm::pow(B2, self.step as f64);
        for i in 0..params.len() {
            let g = grad[i];
            if g == 0.0 && self.m[i] == 0.0 && self.v[i] == 0.0 {
                continue;
            }
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * g;
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (libm::sqrt(vh) + EPS);
        }
    }
}
