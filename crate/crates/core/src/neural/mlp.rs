use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NeuralError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Linear,
    Tanh,
}

/// Fully connected network with rectifier hidden layers.
///
/// All weights and biases live in one flat buffer so optimizers, soft target
/// updates and gradient checks can treat the network as a single vector.
/// Layer `l` stores its weight matrix row-major as `[out][in]` followed by
/// its bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
    output: OutputActivation,
}

/// Activations recorded during a forward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// `activations[0]` is the input, `activations[l + 1]` the post-activation
    /// output of layer `l`.
    activations: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Gradient of the loss with respect to every parameter and to the input.
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub params: Vec<f64>,
    pub input: Vec<f64>,
}

impl Mlp {
    pub fn zeros(sizes: &[usize], output: OutputActivation) -> Result<Self, NeuralError> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(NeuralError::Shape(format!("invalid layer sizes {sizes:?}")));
        }
        let n = Self::param_count(sizes);
        Ok(Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; n],
            output,
        })
    }

    /// Uniform fan-in initialization, `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        output: OutputActivation,
        rng: &mut R,
    ) -> Result<Self, NeuralError> {
        let mut net = Self::zeros(sizes, output)?;
        let mut offset = 0;
        for l in 0..sizes.len() - 1 {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut net.params[offset..offset + fan_in * fan_out + fan_out] {
                *p = rng.gen_range(-bound..bound);
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(net)
    }

    pub fn from_params(
        sizes: &[usize],
        output: OutputActivation,
        params: Vec<f64>,
    ) -> Result<Self, NeuralError> {
        let mut net = Self::zeros(sizes, output)?;
        if params.len() != net.params.len() {
            return Err(NeuralError::Shape(format!(
                "expected {} parameters, got {}",
                net.params.len(),
                params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn param_count(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// `(name, shape, offset)` for each weight and bias tensor.
    pub fn tensor_layout(&self) -> Vec<(String, Vec<usize>, usize)> {
        let mut out = Vec::new();
        let mut offset = 0;
        for l in 0..self.sizes.len() - 1 {
            let (i, o) = (self.sizes[l], self.sizes[l + 1]);
            out.push((format!("layer{l}.weight"), vec![o, i], offset));
            offset += i * o;
            out.push((format!("layer{l}.bias"), vec![o], offset));
            offset += o;
        }
        out
    }

    fn layer_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.sizes.len() - 1);
        let mut offset = 0;
        for w in self.sizes.windows(2) {
            offsets.push(offset);
            offset += w[0] * w[1] + w[1];
        }
        offsets
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, MlpCache), NeuralError> {
        if x.len() != self.input_size() {
            return Err(NeuralError::Shape(format!(
                "input has {} features, network expects {}",
                x.len(),
                self.input_size()
            )));
        }
        let n_layers = self.sizes.len() - 1;
        let mut activations = Vec::with_capacity(n_layers + 1);
        activations.push(x.to_vec());
        for (l, offset) in self.layer_offsets().into_iter().enumerate() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[offset..offset + fan_in * fan_out];
            let b = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            let input = &activations[l];
            let last = l + 1 == n_layers;
            let z: Vec<f64> = (0..fan_out)
                .map(|j| {
                    let row = &w[j * fan_in..(j + 1) * fan_in];
                    let s = b[j] + row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
                    if !last {
                        s.max(0.0)
                    } else {
                        match self.output {
                            OutputActivation::Linear => s,
                            OutputActivation::Tanh => s.tanh(),
                        }
                    }
                })
                .collect();
            activations.push(z);
        }
        let out = activations.last().unwrap().clone();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(NeuralError::NonFinite("mlp output"));
        }
        Ok((out, MlpCache { activations }))
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>, NeuralError> {
        self.forward(x).map(|(y, _)| y)
    }

    /// Backpropagates `d_out` (gradient with respect to the network output,
    /// after the output activation).
    pub fn backward(&self, cache: &MlpCache, d_out: &[f64]) -> Result<MlpGrads, NeuralError> {
        let mut grads = vec![0.0; self.params.len()];
        let d_input = self.backward_into(cache, d_out, &mut grads)?;
        Ok(MlpGrads {
            params: grads,
            input: d_input,
        })
    }

    /// Like [`Mlp::backward`] but accumulates parameter gradients into `grads`.
    pub fn backward_into(
        &self,
        cache: &MlpCache,
        d_out: &[f64],
        grads: &mut [f64],
    ) -> Result<Vec<f64>, NeuralError> {
        let n_layers = self.sizes.len() - 1;
        if d_out.len() != self.output_size()
            || cache.activations.len() != n_layers + 1
            || grads.len() != self.params.len()
        {
            return Err(NeuralError::Shape("backward shapes do not match network".into()));
        }
        let offsets = self.layer_offsets();
        let y = &cache.activations[n_layers];
        let mut delta: Vec<f64> = match self.output {
            OutputActivation::Linear => d_out.to_vec(),
            OutputActivation::Tanh => d_out.iter().zip(y).map(|(g, t)| g * (1.0 - t * t)).collect(),
        };
        for l in (0..n_layers).rev() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let offset = offsets[l];
            let input = &cache.activations[l];
            {
                let (gw, gb) = grads[offset..offset + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
                for j in 0..fan_out {
                    let d = delta[j];
                    if d == 0.0 {
                        continue;
                    }
                    gb[j] += d;
                    for (g, x) in gw[j * fan_in..(j + 1) * fan_in].iter_mut().zip(input) {
                        *g += d * x;
                    }
                }
            }
            let w = &self.params[offset..offset + fan_in * fan_out];
            let mut prev = vec![0.0; fan_in];
            for j in 0..fan_out {
                let d = delta[j];
                if d == 0.0 {
                    continue;
                }
                for (p, wij) in prev.iter_mut().zip(&w[j * fan_in..(j + 1) * fan_in]) {
                    *p += d * wij;
                }
            }
            if l > 0 {
                // rectifier derivative of the previous layer
                for (p, a) in prev.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *p = 0.0;
                    }
                }
            }
            delta = prev;
        }
        Ok(delta)
    }

    /// `self ← tau·source + (1 − tau)·self`.
    pub fn soft_update_from(&mut self, source: &Mlp, tau: f64) -> Result<(), NeuralError> {
        if source.sizes != self.sizes {
            return Err(NeuralError::Shape("soft update between different architectures".into()));
        }
        if tau >= 1.0 {
            self.params.copy_from_slice(&source.params);
        } else {
            for (t, s) in self.params.iter_mut().zip(&source.params) {
                *t = tau * s + (1.0 - tau) * *t;
            }
        }
        Ok(())
    }
}
