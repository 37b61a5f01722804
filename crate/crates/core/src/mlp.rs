//! Fully connected networks with explicit reverse-mode gradients.
//!
//! Parameters for layer `l` are stored as `W_l` (row-major, `[out, in]`)
//! followed by `b_l`. Hidden layers apply the activation, the output layer
//! is linear.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Layout;
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
}

/// Activation cache from one forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    param_count: usize,
    dims: Vec<usize>,
    /// `activations[l]` is the input to layer `l`; the last entry is the output.
    activations: Vec<Vec<f64>>,
}

impl Tape {
    pub fn output(&self) -> &[f64] {
        self.activations.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden: Vec<usize>, output_dim: usize, activation: Activation) -> Self {
        MlpSpec {
            input_dim,
            hidden,
            output_dim,
            activation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::Config(format!("all MLP dims must be >= 1: {self:?}")));
        }
        Ok(())
    }

    /// `[input, hidden..., output]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = Vec::with_capacity(self.hidden.len() + 2);
        d.push(self.input_dim);
        d.extend_from_slice(&self.hidden);
        d.push(self.output_dim);
        d
    }

    pub fn param_count(&self) -> usize {
        self.dims().windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Registers `prefix.l{i}.w` / `prefix.l{i}.b` segments and returns the covered range.
    pub fn push_segments(&self, layout: &mut Layout, prefix: &str) -> Range<usize> {
        let start = layout.len();
        for (i, w) in self.dims().windows(2).enumerate() {
            layout.push(format!("{prefix}.l{i}.w"), vec![w[1], w[0]]);
            layout.push(format!("{prefix}.l{i}.b"), vec![w[1]]);
        }
        start..layout.len()
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Dimension {
                context: "mlp params",
                expected: self.param_count(),
                got: params.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, params: &[f64], input: &[f64]) -> Result<(Vec<f64>, Tape)> {
        self.check_params(params)?;
        if input.len() != self.input_dim {
            return Err(Error::Dimension {
                context: "mlp input",
                expected: self.input_dim,
                got: input.len(),
            });
        }
        let dims = self.dims();
        let n_layers = dims.len() - 1;
        let mut activations = Vec::with_capacity(dims.len());
        activations.push(input.to_vec());
        let mut offset = 0;
        for l in 0..n_layers {
            let (din, dout) = (dims[l], dims[l + 1]);
            let w = &params[offset..offset + din * dout];
            let b = &params[offset + din * dout..offset + din * dout + dout];
            offset += din * dout + dout;
            let x = &activations[l];
            let mut y: Vec<f64> = b.to_vec();
            for (o, yo) in y.iter_mut().enumerate() {
                let row = &w[o * din..(o + 1) * din];
                *yo += row.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>();
            }
            if l + 1 < n_layers {
                for v in &mut y {
                    *v = self.activation.apply(*v);
                }
            }
            activations.push(y);
        }
        let out = activations.last().cloned().unwrap_or_default();
        Ok((
            out,
            Tape {
                param_count: params.len(),
                dims,
                activations,
            },
        ))
    }

    /// Accumulates `d(output . output_grad)/d params` into `grad` and returns
    /// the gradient with respect to the input.
    pub fn backward(
        &self,
        params: &[f64],
        tape: &Tape,
        output_grad: &[f64],
        grad: &mut [f64],
    ) -> Result<Vec<f64>> {
        self.check_params(params)?;
        if tape.param_count != params.len() || tape.dims != self.dims() {
            return Err(Error::StaleTape);
        }
        if grad.len() != params.len() {
            return Err(Error::Dimension {
                context: "mlp grad buffer",
                expected: params.len(),
                got: grad.len(),
            });
        }
        if output_grad.len() != self.output_dim {
            return Err(Error::Dimension {
                context: "mlp output grad",
                expected: self.output_dim,
                got: output_grad.len(),
            });
        }
        let dims = &tape.dims;
        let n_layers = dims.len() - 1;
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for l in 0..n_layers {
            offsets.push(off);
            off += dims[l] * dims[l + 1] + dims[l + 1];
        }
        let mut delta = output_grad.to_vec();
        for l in (0..n_layers).rev() {
            let (din, dout) = (dims[l], dims[l + 1]);
            let base = offsets[l];
            let x = &tape.activations[l];
            {
                let (gw, gb) = grad[base..base + din * dout + dout].split_at_mut(din * dout);
                for o in 0..dout {
                    let d = delta[o];
                    gb[o] += d;
                    if d != 0.0 {
                        let row = &mut gw[o * din..(o + 1) * din];
                        for (g, xi) in row.iter_mut().zip(x) {
                            *g += d * xi;
                        }
                    }
                }
            }
            let w = &params[base..base + din * dout];
            let mut dx = vec![0.0; din];
            for o in 0..dout {
                let d = delta[o];
                if d != 0.0 {
                    for (dxi, wi) in dx.iter_mut().zip(&w[o * din..(o + 1) * din]) {
                        *dxi += d * wi;
                    }
                }
            }
            if l > 0 {
                for (dxi, &xi) in dx.iter_mut().zip(x) {
                    *dxi *= self.activation.derivative_from_output(xi);
                }
            }
            delta = dx;
        }
        Ok(delta)
    }

    /// Orthogonal initialization: hidden weights scaled by `hidden_gain`,
    /// output weights by `output_gain`, biases zero.
    pub fn init_orthogonal(&self, params: &mut [f64], rng: &mut Stream, hidden_gain: f64, output_gain: f64) {
        let dims = self.dims();
        let n_layers = dims.len() - 1;
        let mut offset = 0;
        for l in 0..n_layers {
            let (din, dout) = (dims[l], dims[l + 1]);
            let gain = if l + 1 == n_layers { output_gain } else { hidden_gain };
            let w = orthogonal(dout, din, rng);
            for (p, v) in params[offset..offset + din * dout].iter_mut().zip(w) {
                *p = gain * v;
            }
            for p in &mut params[offset + din * dout..offset + din * dout + dout] {
                *p = 0.0;
            }
            offset += din * dout + dout;
        }
    }
}

/// Row-major `rows x cols` matrix with orthonormal rows or columns
/// (whichever is the shorter side), via modified Gram-Schmidt on a
/// Gaussian draw.
pub fn orthogonal(rows: usize, cols: usize, rng: &mut Stream) -> Vec<f64> {
    let (tall, short) = if rows >= cols { (rows, cols) } else { (cols, rows) };
    // `short` column vectors of length `tall`.
    let mut q: Vec<Vec<f64>> = (0..short)
        .map(|_| (0..tall).map(|_| rng.normal()).collect())
        .collect();
    for j in 0..short {
        for i in 0..j {
            let (head, tail) = q.split_at_mut(j);
            let proj: f64 = head[i].iter().zip(tail[0].iter()).map(|(a, b)| a * b).sum();
            for (v, u) in tail[0].iter_mut().zip(&head[i]) {
                *v -= proj * u;
            }
        }
        let n = q[j].iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        for v in &mut q[j] {
            *v /= n;
        }
    }
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[r * cols + c] = if rows >= cols { q[c][r] } else { q[r][c] };
        }
    }
    out
}
