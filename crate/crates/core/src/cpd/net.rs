//! A small fully-connected network with hand-written backpropagation.
//! Deliberately minimal: two rectifier hidden layers, linear outputs,
//! mini-batch gradient descent. All arithmetic is sequential `f64`, so
//! training is bit-reproducible for a given seed.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `[output][input]`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Dense {
    fn new(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = (0..inputs * outputs)
            .map(|_| rng.gen_range(-bound..=bound))
            .collect();
        Self {
            inputs,
            outputs,
            weights,
            biases: vec![0.0; outputs],
        }
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let mut acc = self.biases[o];
            for (w, xi) in row.iter().zip(x) {
                acc += w * xi;
            }
            out.push(acc);
        }
    }
}

/// Input → ReLU(h) → ReLU(h) → linear outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Dense>,
}

/// Per-layer weight/bias gradients, same shapes as the network.
pub struct Gradients {
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros(net: &Mlp) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }
}

/// Cached activations from a forward pass: `post[0]` is the input, `post[i]`
/// the output of layer `i` after its activation.
pub struct Trace {
    post: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.post.last().expect("trace has layers")
    }
}

impl Mlp {
    pub fn new(inputs: usize, hidden: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            layers: vec![
                Dense::new(inputs, hidden, rng),
                Dense::new(hidden, hidden, rng),
                Dense::new(hidden, outputs, rng),
            ],
        }
    }

    /// Builds a network from explicit layers; used to hand-set exact
    /// distributions in diagnostics and tests.
    #[doc(hidden)]
    pub fn from_raw_layers(layers: Vec<Dense>) -> Self {
        Self { layers }
    }

    pub fn inputs(&self) -> usize {
        self.layers.first().map(|l| l.inputs).unwrap_or(0)
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().map(|l| l.outputs).unwrap_or(0)
    }

    fn is_hidden(&self, layer: usize) -> bool {
        layer + 1 < self.layers.len()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_trace(x).post.pop().expect("trace has layers")
    }

    pub fn forward_trace(&self, x: &[f64]) -> Trace {
        debug_assert_eq!(x.len(), self.inputs());
        let mut post = Vec::with_capacity(self.layers.len() + 1);
        post.push(x.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::new();
            layer.forward(post.last().expect("nonempty"), &mut out);
            if self.is_hidden(i) {
                for v in &mut out {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            post.push(out);
        }
        Trace { post }
    }

    /// Accumulates gradients for one sample given `dL/d(output)`.
    pub fn backward(&self, trace: &Trace, grad_output: &[f64], grads: &mut Gradients) {
        let mut upstream = grad_output.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &trace.post[i];
            let gw = &mut grads.weights[i];
            let gb = &mut grads.biases[i];
            for o in 0..layer.outputs {
                let g = upstream[o];
                gb[o] += g;
                let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                for (slot, xi) in row.iter_mut().zip(input) {
                    *slot += g * xi;
                }
            }
            if i > 0 {
                let mut down = vec![0.0; layer.inputs];
                for (o, &g) in upstream.iter().enumerate().take(layer.outputs) {
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (slot, w) in down.iter_mut().zip(row) {
                        *slot += g * w;
                    }
                }
                // Rectifier gate of the layer below (post-activation is zero
                // exactly where the gate is closed).
                for (slot, post) in down.iter_mut().zip(&trace.post[i]) {
                    if *post <= 0.0 {
                        *slot = 0.0;
                    }
                }
                upstream = down;
            }
        }
    }

    pub fn sgd_step(&mut self, grads: &Gradients, learning_rate: f64, batch: usize) {
        let scale = learning_rate / batch.max(1) as f64;
        for (layer, (gw, gb)) in self
            .layers
            .iter_mut()
            .zip(grads.weights.iter().zip(&grads.biases))
        {
            for (w, g) in layer.weights.iter_mut().zip(gw) {
                *w -= scale * g;
            }
            for (b, g) in layer.biases.iter_mut().zip(gb) {
                *b -= scale * g;
            }
        }
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients::zeros(self)
    }

    /// Flat read access to every parameter, for finite-difference checks.
    #[doc(hidden)]
    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    #[doc(hidden)]
    pub fn parameter(&self, index: usize) -> f64 {
        *self.parameter_slot_ref(index)
    }

    #[doc(hidden)]
    pub fn set_parameter(&mut self, index: usize, value: f64) {
        *self.parameter_slot_mut(index) = value;
    }

    #[doc(hidden)]
    pub fn gradient_at(grads: &Gradients, net: &Mlp, index: usize) -> f64 {
        let mut at = index;
        for (i, layer) in net.layers.iter().enumerate() {
            if at < layer.weights.len() {
                return grads.weights[i][at];
            }
            at -= layer.weights.len();
            if at < layer.biases.len() {
                return grads.biases[i][at];
            }
            at -= layer.biases.len();
        }
        panic!("parameter index {index} out of range");
    }

    fn parameter_slot_ref(&self, index: usize) -> &f64 {
        let mut at = index;
        for layer in &self.layers {
            if at < layer.weights.len() {
                return &layer.weights[at];
            }
            at -= layer.weights.len();
            if at < layer.biases.len() {
                return &layer.biases[at];
            }
            at -= layer.biases.len();
        }
        panic!("parameter index {index} out of range");
    }

    fn parameter_slot_mut(&mut self, index: usize) -> &mut f64 {
        let mut at = index;
        for layer in &mut self.layers {
            if at < layer.weights.len() {
                return &mut layer.weights[at];
            }
            at -= layer.weights.len();
            if at < layer.biases.len() {
                return &mut layer.biases[at];
            }
            at -= layer.biases.len();
        }
        panic!("parameter index {index} out of range");
    }
}
