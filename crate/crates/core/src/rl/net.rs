//! Dense feed-forward network with hand-written reverse-mode gradients.
//!
//! Weights are stored row-major per layer (one row per output unit), biases
//! per layer; hidden layers apply the configured activation, the output
//! layer is linear. The flat parameter order (layer 0 weights row-major,
//! layer 0 biases, layer 1 weights, ...) is shared by the optimizer and the
//! checkpoint format.

use rand::Rng;

use crate::error::{Result, VivError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    pub fn tag(self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::Relu => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Activation::Tanh),
            1 => Ok(Activation::Relu),
            other => Err(VivError::Checkpoint(format!(
                "unknown activation tag {other}"
            ))),
        }
    }

    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative given pre-activation `z` and post-activation `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct DenseNet {
    pub layer_dims: Vec<usize>,
    /// weights[l] has layer_dims[l+1] rows of layer_dims[l] columns.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub activation: Activation,
}

/// Activations recorded during a forward pass, consumed by [`DenseNet::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// a[0] = input, a[l] = post-activation of layer l-1, a[L] = output.
    activations: Vec<Vec<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("cache has layers")
    }
}

/// Parameter-shaped gradients plus the gradient with respect to the input.
#[derive(Debug, Clone)]
pub struct NetGradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub input: Vec<f64>,
}

impl NetGradients {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Self {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            input: vec![0.0; net.layer_dims[0]],
        }
    }

    pub fn add_scaled(&mut self, other: &NetGradients, scale: f64) {
        for (dst, src) in self.weights.iter_mut().zip(&other.weights) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s * scale;
            }
        }
        for (dst, src) in self.biases.iter_mut().zip(&other.biases) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s * scale;
            }
        }
        for (d, s) in self.input.iter_mut().zip(&other.input) {
            *d += s * scale;
        }
    }

    /// Flatten parameter gradients in the canonical layer order.
    pub fn write_flat(&self, out: &mut Vec<f64>) {
        out.clear();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
    }
}

impl DenseNet {
    /// Zero-initialized network.
    pub fn new(layer_dims: Vec<usize>, activation: Activation) -> Result<Self> {
        if layer_dims.len() < 2 {
            return Err(VivError::Shape(
                "network needs at least input and output dims".into(),
            ));
        }
        if layer_dims.iter().any(|&d| d == 0) {
            return Err(VivError::Shape("zero-width layer".into()));
        }
        let weights = layer_dims
            .windows(2)
            .map(|w| vec![0.0; w[0] * w[1]])
            .collect();
        let biases = layer_dims[1..].iter().map(|&d| vec![0.0; d]).collect();
        Ok(Self {
            layer_dims,
            weights,
            biases,
            activation,
        })
    }

    /// Scaled-uniform init: limit gain * sqrt(6 / (fan_in + fan_out)) per
    /// layer, with a separate (typically much smaller) gain on the output
    /// layer so initial policies act near zero.
    pub fn init_scaled_uniform<R: Rng>(&mut self, rng: &mut R, hidden_gain: f64, output_gain: f64) {
        let layers = self.weights.len();
        for l in 0..layers {
            let fan_in = self.layer_dims[l] as f64;
            let fan_out = self.layer_dims[l + 1] as f64;
            let gain = if l + 1 == layers { output_gain } else { hidden_gain };
            let limit = gain * (6.0 / (fan_in + fan_out)).sqrt();
            for w in self.weights[l].iter_mut() {
                *w = (rng.random::<f64>() * 2.0 - 1.0) * limit;
            }
            for b in self.biases[l].iter_mut() {
                *b = 0.0;
            }
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut cache = self.forward_cached(x)?;
        Ok(cache.activations.pop().expect("non-empty activations"))
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<ForwardCache> {
        if x.len() != self.input_dim() {
            return Err(VivError::Shape(format!(
                "input has {} components, net expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let layers = self.weights.len();
        let mut activations = Vec::with_capacity(layers + 1);
        let mut pre = Vec::with_capacity(layers);
        activations.push(x.to_vec());
        for l in 0..layers {
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let input = &activations[l];
            let mut z = self.biases[l].clone();
            let w = &self.weights[l];
            for i in 0..n_out {
                let row = &w[i * n_in..(i + 1) * n_in];
                let mut acc = 0.0;
                for (wij, xj) in row.iter().zip(input.iter()) {
                    acc += wij * xj;
                }
                z[i] += acc;
            }
            let a = if l + 1 == layers {
                z.clone()
            } else {
                z.iter().map(|&v| self.activation.apply(v)).collect()
            };
            pre.push(z);
            activations.push(a);
        }
        Ok(ForwardCache { activations, pre })
    }

    /// Exact reverse-mode gradients of upstream . output with respect to all
    /// parameters and the input.
    pub fn backward(&self, cache: &ForwardCache, upstream: &[f64]) -> Result<NetGradients> {
        if upstream.len() != self.output_dim() {
            return Err(VivError::Shape(format!(
                "upstream has {} components, output has {}",
                upstream.len(),
                self.output_dim()
            )));
        }
        let layers = self.weights.len();
        let mut grads = NetGradients::zeros_like(self);
        let mut delta = upstream.to_vec();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let input = &cache.activations[l];
            let gw = &mut grads.weights[l];
            for i in 0..n_out {
                let di = delta[i];
                let row = &mut gw[i * n_in..(i + 1) * n_in];
                for (g, xj) in row.iter_mut().zip(input.iter()) {
                    *g = di * xj;
                }
            }
            grads.biases[l].copy_from_slice(&delta);

            // Propagate to the layer input.
            let w = &self.weights[l];
            let mut prev = vec![0.0; n_in];
            for i in 0..n_out {
                let di = delta[i];
                let row = &w[i * n_in..(i + 1) * n_in];
                for (p, wij) in prev.iter_mut().zip(row.iter()) {
                    *p += wij * di;
                }
            }
            if l > 0 {
                let z = &cache.pre[l - 1];
                let a = &cache.activations[l];
                for (p, (zi, ai)) in prev.iter_mut().zip(z.iter().zip(a.iter())) {
                    *p *= self.activation.derivative(*zi, *ai);
                }
            }
            if l == 0 {
                grads.input = prev;
            } else {
                delta = prev;
            }
        }
        Ok(grads)
    }

    /// Flatten parameters in the canonical layer order.
    pub fn write_flat(&self, out: &mut Vec<f64>) {
        out.clear();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
    }

    /// Load parameters from the canonical flat order.
    pub fn read_flat(&mut self, src: &[f64]) -> Result<()> {
        if src.len() != self.param_count() {
            return Err(VivError::Shape(format!(
                "flat buffer has {} values, net has {} parameters",
                src.len(),
                self.param_count()
            )));
        }
        let mut at = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let wn = w.len();
            w.copy_from_slice(&src[at..at + wn]);
            at += wn;
            let bn = b.len();
            b.copy_from_slice(&src[at..at + bn]);
            at += bn;
        }
        Ok(())
    }
}
