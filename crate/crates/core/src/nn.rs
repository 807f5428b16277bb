//! Small dense networks with hand-written backpropagation.
//!
//! Parameters live in one flat vector so that optimizers, target-network
//! copies, checkpoints and finite-difference checks all work on plain slices.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Uniform fan-in initialization: U(−1/√fan_in, 1/√fan_in).
pub(crate) fn fan_in_uniform<R: Rng + ?Sized>(rng: &mut R, fan_in: usize, out: &mut [f64]) {
    let bound = 1.0 / (fan_in as f64).sqrt();
    for w in out {
        *w = rng.random_range(-bound..bound);
    }
}

/// Fully connected ReLU network with a linear output layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Per-sample activations recorded by [`Mlp::forward_tape`].
#[derive(Clone, Debug, Default)]
pub struct MlpTape {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl Mlp {
    pub fn param_count(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        let mut params = vec![0.0; Self::param_count(sizes)];
        let mut off = 0;
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let n = fan_in * fan_out + fan_out;
            fan_in_uniform(rng, fan_in, &mut params[off..off + n]);
            off += n;
        }
        Self {
            sizes: sizes.to_vec(),
            params,
        }
    }

    pub fn from_params(sizes: Vec<usize>, params: Vec<f64>) -> Option<Self> {
        (sizes.len() >= 2 && params.len() == Self::param_count(&sizes))
            .then_some(Self { sizes, params })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn new_tape(&self) -> MlpTape {
        MlpTape {
            acts: self.sizes.iter().map(|&n| vec![0.0; n]).collect(),
            delta: Vec::new(),
            delta_prev: Vec::new(),
        }
    }

    /// Forward pass that keeps the activations for a later `backward`.
    pub fn forward_tape<'t>(&self, input: &[f64], tape: &'t mut MlpTape) -> &'t [f64] {
        debug_assert_eq!(input.len(), self.input_dim());
        tape.acts[0].copy_from_slice(input);
        let layers = self.sizes.len() - 1;
        let mut off = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let (w, rest) = self.params[off..].split_at(n_in * n_out);
            let b = &rest[..n_out];
            let (prev, next) = tape.acts.split_at_mut(l + 1);
            let x = &prev[l];
            let y = &mut next[0];
            for (o, yo) in y.iter_mut().enumerate() {
                let row = &w[o * n_in..(o + 1) * n_in];
                let mut s = b[o];
                for (wi, xi) in row.iter().zip(x) {
                    s += wi * xi;
                }
                *yo = if l + 1 < layers { s.max(0.0) } else { s };
            }
            off += n_in * n_out + n_out;
        }
        &tape.acts[layers]
    }

    /// Forward pass without keeping a tape.
    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let mut tape = self.new_tape();
        self.forward_tape(input, &mut tape).to_vec()
    }

    /// Accumulates d(loss)/d(params) into `grads`, given d(loss)/d(output)
    /// for the sample recorded in `tape`.
    pub fn backward(&self, tape: &mut MlpTape, grad_out: &[f64], grads: &mut [f64]) {
        let layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0;
        for w in self.sizes.windows(2) {
            offsets.push(off);
            off += w[0] * w[1] + w[1];
        }
        tape.delta.clear();
        tape.delta.extend_from_slice(grad_out);
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let x = &tape.acts[l];
            let (gw, gb) = grads[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            for o in 0..n_out {
                let d = tape.delta[o];
                if d == 0.0 {
                    continue;
                }
                gb[o] += d;
                for (g, xi) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(x) {
                    *g += d * xi;
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.params[off..off + n_in * n_out];
            tape.delta_prev.clear();
            tape.delta_prev.resize(n_in, 0.0);
            for o in 0..n_out {
                let d = tape.delta[o];
                if d == 0.0 {
                    continue;
                }
                for (dp, wi) in tape.delta_prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *dp += d * wi;
                }
            }
            // ReLU derivative on the hidden layer that fed this one.
            for (dp, a) in tape.delta_prev.iter_mut().zip(&tape.acts[l]) {
                if *a <= 0.0 {
                    *dp = 0.0;
                }
            }
            std::mem::swap(&mut tape.delta, &mut tape.delta_prev);
        }
    }
}

/// Adaptive moment estimation over a flat parameter vector.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n_params: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        debug_assert_eq!(params.len(), grads.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let step = lr / bc1;
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= step * *m / ((*v / bc2).sqrt() + self.eps);
        }
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
