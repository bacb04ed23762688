//! Fully connected networks over a flat parameter vector, with hand-derived
//! reverse-mode gradients.
//!
//! Parameter layout, per layer: weight matrix (out x in, row-major)
//! followed by the bias vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

/// Output head: Gaussian mean for regression or softmax logits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    GaussianRegression,
    CategoricalSoftmax,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawArchitecture {
    layer_widths: Vec<usize>,
    activation: Activation,
    head: Head,
}

/// Layer widths `[d_in, hidden.., d_out]`, hidden activation and head.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawArchitecture")]
pub struct MlpArchitecture {
    layer_widths: Vec<usize>,
    activation: Activation,
    head: Head,
}

impl TryFrom<RawArchitecture> for MlpArchitecture {
    type Error = Error;

    fn try_from(raw: RawArchitecture) -> Result<Self> {
        MlpArchitecture::new(raw.layer_widths, raw.activation, raw.head)
    }
}

impl MlpArchitecture {
    pub fn new(layer_widths: Vec<usize>, activation: Activation, head: Head) -> Result<Self> {
        if layer_widths.len() < 2 {
            return Err(Error::InvalidArgument(
                "an architecture needs at least input and output layers".into(),
            ));
        }
        if layer_widths.contains(&0) {
            return Err(Error::InvalidArgument("layer widths must be >= 1".into()));
        }
        Ok(Self {
            layer_widths,
            activation,
            head,
        })
    }

    /// `[d_in, hidden.., d_out]`.
    pub fn with_hidden(
        input: usize,
        hidden: &[usize],
        output: usize,
        activation: Activation,
        head: Head,
    ) -> Result<Self> {
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(input);
        widths.extend_from_slice(hidden);
        widths.push(output);
        Self::new(widths, activation, head)
    }

    pub fn layer_widths(&self) -> &[usize] {
        &self.layer_widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn input_dim(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_widths.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.layer_widths.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.layer_widths
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// For each parameter, the fan-in of the layer it belongs to and whether
    /// it is a bias.
    pub(crate) fn param_roles(&self) -> Vec<(usize, bool)> {
        let mut roles = Vec::with_capacity(self.param_count());
        for w in self.layer_widths.windows(2) {
            roles.extend(std::iter::repeat_n((w[0], false), w[0] * w[1]));
            roles.extend(std::iter::repeat_n((w[0], true), w[1]));
        }
        roles
    }

    pub fn workspace(&self) -> Workspace {
        Workspace {
            acts: self.layer_widths.iter().map(|&w| vec![0.0; w]).collect(),
            delta: vec![0.0; *self.layer_widths.iter().max().unwrap()],
            delta_prev: vec![0.0; *self.layer_widths.iter().max().unwrap()],
        }
    }

    /// Network output (regression means or logits).
    pub fn forward(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        let mut ws = self.workspace();
        self.forward_ws(params, x, &mut ws).to_vec()
    }

    pub(crate) fn forward_ws<'w>(&self, params: &[f64], x: &[f64], ws: &'w mut Workspace) -> &'w [f64] {
        debug_assert_eq!(params.len(), self.param_count());
        debug_assert_eq!(x.len(), self.input_dim());
        ws.acts[0].copy_from_slice(x);
        let last = self.num_layers() - 1;
        let mut offset = 0;
        for l in 0..self.num_layers() {
            let (n_in, n_out) = (self.layer_widths[l], self.layer_widths[l + 1]);
            let (w, rest) = params[offset..].split_at(n_in * n_out);
            let b = &rest[..n_out];
            offset += n_in * n_out + n_out;
            let (prev, next) = ws.acts.split_at_mut(l + 1);
            let input = &prev[l];
            let out = &mut next[0];
            for (o, (row, bias)) in out.iter_mut().zip(w.chunks_exact(n_in).zip(b)) {
                let z = bias + row.iter().zip(input).map(|(w, a)| w * a).sum::<f64>();
                *o = if l == last { z } else { self.activation.apply(z) };
            }
        }
        &ws.acts[self.num_layers()]
    }

    /// Accumulates `d_out^T d(output)/d(params)` into `grad`, using the
    /// activations left in `ws` by the preceding `forward_ws`.
    pub(crate) fn backward_ws(&self, params: &[f64], ws: &mut Workspace, d_out: &[f64], grad: &mut [f64]) {
        let n_layers = self.num_layers();
        let Workspace {
            acts,
            delta,
            delta_prev,
        } = ws;
        delta[..d_out.len()].copy_from_slice(d_out);

        let mut offsets = Vec::with_capacity(n_layers);
        let mut offset = 0;
        for w in self.layer_widths.windows(2) {
            offsets.push(offset);
            offset += w[0] * w[1] + w[1];
        }

        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.layer_widths[l], self.layer_widths[l + 1]);
            let off = offsets[l];
            let input = &acts[l];
            {
                let (gw, gb) = grad[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
                for (o, d) in delta[..n_out].iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    for (g, a) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(input) {
                        *g += d * a;
                    }
                    gb[o] += d;
                }
            }
            if l > 0 {
                let w = &params[off..off + n_in * n_out];
                delta_prev[..n_in].iter_mut().for_each(|v| *v = 0.0);
                for (o, d) in delta[..n_out].iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    for (dp, wv) in delta_prev[..n_in].iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                        *dp += d * wv;
                    }
                }
                for (dp, a) in delta_prev[..n_in].iter_mut().zip(input) {
                    *dp *= self.activation.derivative_from_output(*a);
                }
                std::mem::swap(delta, delta_prev);
            }
        }
    }
}

/// Scratch buffers reused across forward/backward passes.
#[derive(Debug, Clone)]
pub struct Workspace {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}
