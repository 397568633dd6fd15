//! Dense feed-forward networks with exact backpropagation, the numeric
//! core under every learning agent.
//!
//! Deliberately minimal: fixed architecture (affine layers, rectifier
//! hidden activations, identity or tanh output), reverse-mode gradients
//! for parameters and inputs, Adam with bias correction, Polyak soft
//! updates and an inverse-time learning-rate schedule. Everything runs
//! in f64; at these layer widths determinism and gradient-check
//! headroom are worth more than raw speed.

use std::io::{self, BufRead, Write};

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("network shapes differ: {0}")]
    ShapeMismatch(String),
    #[error("non-finite gradient: update rejected")]
    NonFiniteGradient,
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Output-layer activation. Hidden layers are always rectifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputActivation {
    #[default]
    Identity,
    Tanh,
}

/// A dense multilayer perceptron. Weights are row-major per layer:
/// `weights[l][o * in + i]` connects input `i` to output `o`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub dims: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub output_activation: OutputActivation,
}

/// Activations recorded by [`Mlp::forward`] for the matching backward
/// pass: `post[0]` is the input, `pre[l]` the pre-activation of layer
/// `l + 1`.
#[derive(Debug, Clone)]
pub struct Cache {
    post: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

/// Gradients of a scalar objective with respect to every parameter and
/// to the network input, shaped exactly like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub d_weights: Vec<Vec<f64>>,
    pub d_biases: Vec<Vec<f64>>,
    pub d_input: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            d_weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            d_biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            d_input: vec![0.0; net.dims[0]],
        }
    }

    /// Elementwise accumulate, for building batch averages.
    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.d_weights.iter_mut().zip(&other.d_weights) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.d_biases.iter_mut().zip(&other.d_biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (x, y) in self.d_input.iter_mut().zip(&other.d_input) {
            *x += y;
        }
    }

    pub fn scale(&mut self, c: f64) {
        for w in &mut self.d_weights {
            for x in w {
                *x *= c;
            }
        }
        for b in &mut self.d_biases {
            for x in b {
                *x *= c;
            }
        }
        for x in &mut self.d_input {
            *x *= c;
        }
    }

    fn is_finite(&self) -> bool {
        self.d_weights.iter().all(|w| w.iter().all(|x| x.is_finite()))
            && self.d_biases.iter().all(|b| b.iter().all(|x| x.is_finite()))
            && self.d_input.iter().all(|x| x.is_finite())
    }
}

impl Mlp {
    /// Fresh network: weights uniform in ±1/sqrt(fan_in), biases zero.
    /// Deterministic for a given RNG state.
    pub fn init<R: Rng + ?Sized>(
        dims: &[usize],
        output_activation: OutputActivation,
        rng: &mut R,
    ) -> Self {
        assert!(dims.len() >= 2 && dims.iter().all(|&d| d > 0), "invalid layer dims");
        let mut weights = Vec::with_capacity(dims.len() - 1);
        let mut biases = Vec::with_capacity(dims.len() - 1);
        for l in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            weights.push(
                (0..fan_in * fan_out).map(|_| rng.gen_range(-bound..bound)).collect::<Vec<f64>>(),
            );
            biases.push(vec![0.0; fan_out]);
        }
        Mlp { dims: dims.to_vec(), weights, biases, output_activation }
    }

    pub fn num_layers(&self) -> usize {
        self.dims.len() - 1
    }

    /// Run the network, returning the output and the activation cache
    /// a backward pass needs.
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, Cache), NnError> {
        if input.len() != self.dims[0] {
            return Err(NnError::DimensionMismatch { expected: self.dims[0], got: input.len() });
        }
        let layers = self.num_layers();
        let mut post = Vec::with_capacity(layers + 1);
        let mut pre = Vec::with_capacity(layers);
        post.push(input.to_vec());
        for l in 0..layers {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let mut z = self.biases[l].clone();
            let w = &self.weights[l];
            let a = &post[l];
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                let mut acc = 0.0;
                for i in 0..n_in {
                    acc += row[i] * a[i];
                }
                z[o] += acc;
            }
            let activated = if l + 1 == layers {
                match self.output_activation {
                    OutputActivation::Identity => z.clone(),
                    OutputActivation::Tanh => z.iter().map(|v| v.tanh()).collect(),
                }
            } else {
                z.iter().map(|v| v.max(0.0)).collect()
            };
            pre.push(z);
            post.push(activated);
        }
        Ok((post[layers].clone(), Cache { post, pre }))
    }

    /// Exact reverse-mode gradients of `sum(output * output_gradient)`
    /// with respect to all parameters and the input.
    pub fn backward(&self, cache: &Cache, output_gradient: &[f64]) -> Result<Gradients, NnError> {
        let layers = self.num_layers();
        let out_dim = *self.dims.last().unwrap();
        if output_gradient.len() != out_dim {
            return Err(NnError::DimensionMismatch {
                expected: out_dim,
                got: output_gradient.len(),
            });
        }
        if cache.post.len() != layers + 1 || cache.post[0].len() != self.dims[0] {
            return Err(NnError::ShapeMismatch("cache does not match this network".into()));
        }

        let mut grads = Gradients::zeros_like(self);
        // Delta of the output layer: chain through its activation.
        let mut delta: Vec<f64> = match self.output_activation {
            OutputActivation::Identity => output_gradient.to_vec(),
            OutputActivation::Tanh => {
                let y = &cache.post[layers];
                output_gradient.iter().zip(y).map(|(g, y)| g * (1.0 - y * y)).collect()
            }
        };
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let a_prev = &cache.post[l];
            let dw = &mut grads.d_weights[l];
            for o in 0..n_out {
                let d = delta[o];
                grads.d_biases[l][o] = d;
                let row = &mut dw[o * n_in..(o + 1) * n_in];
                for i in 0..n_in {
                    row[i] = d * a_prev[i];
                }
            }
            // Propagate to the previous layer (or the input).
            let mut prev = vec![0.0; n_in];
            let w = &self.weights[l];
            for o in 0..n_out {
                let d = delta[o];
                let row = &w[o * n_in..(o + 1) * n_in];
                for i in 0..n_in {
                    prev[i] += d * row[i];
                }
            }
            if l == 0 {
                grads.d_input = prev;
            } else {
                // Rectifier derivative from the stored pre-activation.
                let z = &cache.pre[l - 1];
                delta = prev
                    .iter()
                    .zip(z)
                    .map(|(p, z)| if *z > 0.0 { *p } else { 0.0 })
                    .collect();
            }
        }
        Ok(grads)
    }
}

/// Adam optimizer state, shaped like the network it updates.
#[derive(Debug, Clone)]
pub struct AdamState {
    m_weights: Vec<Vec<f64>>,
    v_weights: Vec<Vec<f64>>,
    m_biases: Vec<Vec<f64>>,
    v_biases: Vec<Vec<f64>>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(net: &Mlp) -> Self {
        AdamState {
            m_weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            v_weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            m_biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            v_biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One Adam step with bias correction. A non-finite gradient rejects
/// the whole update, leaving both the network and the optimizer state
/// untouched.
pub fn adam_step(
    net: &mut Mlp,
    state: &mut AdamState,
    grads: &Gradients,
    lr: f64,
) -> Result<(), NnError> {
    if !grads.is_finite() {
        return Err(NnError::NonFiniteGradient);
    }
    if grads.d_weights.len() != net.weights.len()
        || grads
            .d_weights
            .iter()
            .zip(&net.weights)
            .any(|(g, w)| g.len() != w.len())
    {
        return Err(NnError::ShapeMismatch("gradient does not match the network".into()));
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    let update = |param: &mut [f64], m: &mut [f64], v: &mut [f64], g: &[f64]| {
        for k in 0..param.len() {
            m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g[k];
            v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g[k] * g[k];
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            param[k] -= lr * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    };
    for l in 0..net.weights.len() {
        update(
            &mut net.weights[l],
            &mut state.m_weights[l],
            &mut state.v_weights[l],
            &grads.d_weights[l],
        );
        update(
            &mut net.biases[l],
            &mut state.m_biases[l],
            &mut state.v_biases[l],
            &grads.d_biases[l],
        );
    }
    Ok(())
}

/// Polyak blend: every target parameter moves fraction `beta` of the
/// way to its online counterpart.
pub fn soft_update(target: &mut Mlp, online: &Mlp, beta: f64) -> Result<(), NnError> {
    if target.dims != online.dims {
        return Err(NnError::ShapeMismatch(format!(
            "target dims {:?} vs online dims {:?}",
            target.dims, online.dims
        )));
    }
    let blend = |t: &mut Vec<f64>, o: &Vec<f64>| {
        for (x, y) in t.iter_mut().zip(o) {
            *x = (1.0 - beta) * *x + beta * *y;
        }
    };
    for (t, o) in target.weights.iter_mut().zip(&online.weights) {
        blend(t, o);
    }
    for (t, o) in target.biases.iter_mut().zip(&online.biases) {
        blend(t, o);
    }
    Ok(())
}

/// Inverse-time learning-rate decay: `alpha0 / (1 + eta * epoch)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub alpha0: f64,
    pub eta: f64,
    pub epoch: usize,
}

impl LrSchedule {
    pub fn new(alpha0: f64, eta: f64) -> Self {
        LrSchedule { alpha0, eta, epoch: 0 }
    }

    pub fn at(&self, epoch: usize) -> f64 {
        self.alpha0 / (1.0 + self.eta * epoch as f64)
    }

    /// Rate for the current epoch counter.
    pub fn current(&self) -> f64 {
        self.at(self.epoch)
    }

    pub fn advance(&mut self) {
        self.epoch += 1;
    }
}

/// Write a plain-text checkpoint: header `mlp <d0> <d1> ...`, then per
/// layer one `W` line (row-major) and one `b` line, every value with 17
/// significant digits so a reload is bit-exact.
pub fn save_checkpoint<W: Write + ?Sized>(net: &Mlp, out: &mut W) -> Result<(), NnError> {
    let dims: Vec<String> = net.dims.iter().map(|d| d.to_string()).collect();
    writeln!(out, "mlp {}", dims.join(" "))?;
    let fmt = |values: &[f64]| -> String {
        values.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(" ")
    };
    for l in 0..net.num_layers() {
        writeln!(out, "W {}", fmt(&net.weights[l]))?;
        writeln!(out, "b {}", fmt(&net.biases[l]))?;
    }
    Ok(())
}

/// Read a checkpoint produced by [`save_checkpoint`]. The output
/// activation is not part of the format; the caller restores it.
pub fn load_checkpoint<R: BufRead + ?Sized>(input: &mut R) -> Result<Mlp, NnError> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| NnError::Checkpoint("empty file".into()))??;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("mlp") {
        return Err(NnError::Checkpoint("missing `mlp` header".into()));
    }
    let dims: Vec<usize> = parts
        .map(|p| p.parse().map_err(|_| NnError::Checkpoint(format!("bad dimension `{p}`"))))
        .collect::<Result<_, _>>()?;
    if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
        return Err(NnError::Checkpoint(format!("invalid dims {dims:?}")));
    }

    let parse_row = |line: &str, tag: &str, expected: usize| -> Result<Vec<f64>, NnError> {
        let rest = line
            .strip_prefix(tag)
            .ok_or_else(|| NnError::Checkpoint(format!("expected `{tag}` line, got `{line}`")))?;
        let row: Vec<f64> = rest
            .split_whitespace()
            .map(|p| {
                p.parse::<f64>().map_err(|_| NnError::Checkpoint(format!("bad value `{p}`")))
            })
            .collect::<Result<_, _>>()?;
        if row.len() != expected {
            return Err(NnError::Checkpoint(format!(
                "expected {expected} values after `{tag}`, got {}",
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(NnError::Checkpoint("non-finite parameter".into()));
        }
        Ok(row)
    };

    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in 0..dims.len() - 1 {
        let w_line = lines
            .next()
            .ok_or_else(|| NnError::Checkpoint(format!("missing W line for layer {l}")))??;
        weights.push(parse_row(&w_line, "W", dims[l] * dims[l + 1])?);
        let b_line = lines
            .next()
            .ok_or_else(|| NnError::Checkpoint(format!("missing b line for layer {l}")))??;
        biases.push(parse_row(&b_line, "b", dims[l + 1])?);
    }
    Ok(Mlp { dims, weights, biases, output_activation: OutputActivation::Identity })
}
