use rand::Rng;

use super::NeuralError;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Single-layer LSTM followed by a linear head applied to the last hidden
/// state.
///
/// Parameter layout (flat, row-major): input weights `[4H][I]`, recurrent
/// weights `[4H][H]`, gate bias `[4H]`, head weights `[O][H]`, head bias `[O]`.
/// Gate blocks are ordered input, forget, cell candidate, output.
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    input: usize,
    hidden: usize,
    output: usize,
    params: Vec<f64>,
}

#[derive(Debug, Clone)]
struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tanh_c: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    steps: Vec<StepCache>,
    hidden_states: Vec<Vec<f64>>,
}

impl LstmCache {
    /// Hidden state after each input step.
    pub fn hidden_states(&self) -> &[Vec<f64>] {
        &self.hidden_states
    }
}

impl Lstm {
    pub fn zeros(input: usize, hidden: usize, output: usize) -> Result<Self, NeuralError> {
        if input == 0 || hidden == 0 || output == 0 {
            return Err(NeuralError::Shape("lstm dimensions must be positive".into()));
        }
        Ok(Self {
            input,
            hidden,
            output,
            params: vec![0.0; Self::param_count(input, hidden, output)],
        })
    }

    pub fn new<R: Rng + ?Sized>(
        input: usize,
        hidden: usize,
        output: usize,
        rng: &mut R,
    ) -> Result<Self, NeuralError> {
        let mut net = Self::zeros(input, hidden, output)?;
        let gate_bound = 1.0 / (hidden as f64).sqrt();
        let head_start = net.head_offset();
        for p in &mut net.params[..head_start] {
            *p = rng.gen_range(-gate_bound..gate_bound);
        }
        for p in &mut net.params[head_start..] {
            *p = rng.gen_range(-gate_bound..gate_bound);
        }
        Ok(net)
    }

    pub fn from_params(
        input: usize,
        hidden: usize,
        output: usize,
        params: Vec<f64>,
    ) -> Result<Self, NeuralError> {
        let mut net = Self::zeros(input, hidden, output)?;
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

    pub fn param_count(input: usize, hidden: usize, output: usize) -> usize {
        4 * hidden * input + 4 * hidden * hidden + 4 * hidden + output * hidden + output
    }

    pub fn input_size(&self) -> usize {
        self.input
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    pub fn output_size(&self) -> usize {
        self.output
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn wh_offset(&self) -> usize {
        4 * self.hidden * self.input
    }

    fn bias_offset(&self) -> usize {
        self.wh_offset() + 4 * self.hidden * self.hidden
    }

    fn head_offset(&self) -> usize {
        self.bias_offset() + 4 * self.hidden
    }

    pub fn tensor_layout(&self) -> Vec<(String, Vec<usize>, usize)> {
        let (i, h, o) = (self.input, self.hidden, self.output);
        vec![
            ("lstm.weight_ih".into(), vec![4 * h, i], 0),
            ("lstm.weight_hh".into(), vec![4 * h, h], self.wh_offset()),
            ("lstm.bias".into(), vec![4 * h], self.bias_offset()),
            ("head.weight".into(), vec![o, h], self.head_offset()),
            ("head.bias".into(), vec![o], self.head_offset() + o * h),
        ]
    }

    /// Applies the linear head to a hidden state.
    pub fn head(&self, h: &[f64]) -> Vec<f64> {
        let off = self.head_offset();
        let w = &self.params[off..off + self.output * self.hidden];
        let b = &self.params[off + self.output * self.hidden..];
        (0..self.output)
            .map(|k| b[k] + w[k * self.hidden..(k + 1) * self.hidden].iter().zip(h).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }

    /// Unrolls over `seq` (each element one input vector) from a zero state.
    pub fn forward(&self, seq: &[Vec<f64>]) -> Result<(Vec<f64>, LstmCache), NeuralError> {
        if seq.is_empty() {
            return Err(NeuralError::Shape("empty input sequence".into()));
        }
        let hdim = self.hidden;
        let wx = &self.params[..self.wh_offset()];
        let wh = &self.params[self.wh_offset()..self.bias_offset()];
        let bias = &self.params[self.bias_offset()..self.head_offset()];
        let mut h = vec![0.0; hdim];
        let mut c = vec![0.0; hdim];
        let mut steps = Vec::with_capacity(seq.len());
        let mut hidden_states = Vec::with_capacity(seq.len());
        for x in seq {
            if x.len() != self.input {
                return Err(NeuralError::Shape(format!(
                    "sequence element has {} features, cell expects {}",
                    x.len(),
                    self.input
                )));
            }
            let mut z = bias.to_vec();
            for (r, zr) in z.iter_mut().enumerate() {
                let rx = &wx[r * self.input..(r + 1) * self.input];
                let rh = &wh[r * hdim..(r + 1) * hdim];
                *zr += rx.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
                    + rh.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>();
            }
            let i: Vec<f64> = z[..hdim].iter().map(|v| sigmoid(*v)).collect();
            let f: Vec<f64> = z[hdim..2 * hdim].iter().map(|v| sigmoid(*v)).collect();
            let g: Vec<f64> = z[2 * hdim..3 * hdim].iter().map(|v| v.tanh()).collect();
            let o: Vec<f64> = z[3 * hdim..].iter().map(|v| sigmoid(*v)).collect();
            let c_new: Vec<f64> = (0..hdim).map(|k| f[k] * c[k] + i[k] * g[k]).collect();
            let tanh_c: Vec<f64> = c_new.iter().map(|v| v.tanh()).collect();
            let h_new: Vec<f64> = (0..hdim).map(|k| o[k] * tanh_c[k]).collect();
            steps.push(StepCache {
                x: x.clone(),
                h_prev: std::mem::replace(&mut h, h_new.clone()),
                c_prev: std::mem::replace(&mut c, c_new),
                i,
                f,
                g,
                o,
                tanh_c,
            });
            hidden_states.push(h_new);
        }
        let y = self.head(&h);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(NeuralError::NonFinite("lstm output"));
        }
        Ok((y, LstmCache { steps, hidden_states }))
    }

    pub fn predict(&self, seq: &[Vec<f64>]) -> Result<Vec<f64>, NeuralError> {
        self.forward(seq).map(|(y, _)| y)
    }

    /// Backpropagation through time over the whole cached window; gradients
    /// are accumulated into `grads`.
    pub fn backward_into(&self, cache: &LstmCache, d_out: &[f64], grads: &mut [f64]) -> Result<(), NeuralError> {
        if d_out.len() != self.output || grads.len() != self.params.len() || cache.steps.is_empty() {
            return Err(NeuralError::Shape("backward shapes do not match cell".into()));
        }
        let hdim = self.hidden;
        let (wh_off, b_off, head_off) = (self.wh_offset(), self.bias_offset(), self.head_offset());
        let h_last = cache.hidden_states.last().unwrap();
        let head_w = &self.params[head_off..head_off + self.output * hdim];
        let mut dh = vec![0.0; hdim];
        for k in 0..self.output {
            let d = d_out[k];
            grads[head_off + self.output * hdim + k] += d;
            for j in 0..hdim {
                grads[head_off + k * hdim + j] += d * h_last[j];
                dh[j] += d * head_w[k * hdim + j];
            }
        }
        let wh = &self.params[wh_off..b_off];
        let mut dc = vec![0.0; hdim];
        let mut dz = vec![0.0; 4 * hdim];
        for step in cache.steps.iter().rev() {
            for k in 0..hdim {
                let d_o = dh[k] * step.tanh_c[k];
                dc[k] += dh[k] * step.o[k] * (1.0 - step.tanh_c[k] * step.tanh_c[k]);
                let d_i = dc[k] * step.g[k];
                let d_g = dc[k] * step.i[k];
                let d_f = dc[k] * step.c_prev[k];
                dz[k] = d_i * step.i[k] * (1.0 - step.i[k]);
                dz[hdim + k] = d_f * step.f[k] * (1.0 - step.f[k]);
                dz[2 * hdim + k] = d_g * (1.0 - step.g[k] * step.g[k]);
                dz[3 * hdim + k] = d_o * step.o[k] * (1.0 - step.o[k]);
                dc[k] *= step.f[k];
            }
            let mut dh_prev = vec![0.0; hdim];
            for (r, &d) in dz.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                grads[b_off + r] += d;
                for (j, x) in step.x.iter().enumerate() {
                    grads[r * self.input + j] += d * x;
                }
                for j in 0..hdim {
                    grads[wh_off + r * hdim + j] += d * step.h_prev[j];
                    dh_prev[j] += d * wh[r * hdim + j];
                }
            }
            dh = dh_prev;
        }
        Ok(())
    }

    pub fn backward(&self, cache: &LstmCache, d_out: &[f64]) -> Result<Vec<f64>, NeuralError> {
        let mut grads = vec![0.0; self.params.len()];
        self.backward_into(cache, d_out, &mut grads)?;
        Ok(grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_cell_outputs_head_bias() {
        let mut params = vec![0.0; Lstm::param_count(3, 4, 2)];
        let n = params.len();
        params[n - 2] = 0.7;
        params[n - 1] = -1.5;
        let net = Lstm::from_params(3, 4, 2, params).unwrap();
        let seq = vec![vec![1.0, 2.0, 3.0]; 25];
        assert_eq!(net.predict(&seq).unwrap(), vec![0.7, -1.5]);
    }

    #[test]
    fn gradient_check_width_8() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let net = Lstm::new(3, 8, 1, &mut rng).unwrap();
        let seq: Vec<Vec<f64>> = (0..25)
            .map(|t| vec![(t as f64 * 0.3).sin(), (t as f64 * 0.1).cos(), 0.05 * t as f64 - 0.5])
            .collect();
        let loss = |n: &Lstm| 0.5 * (n.predict(&seq).unwrap()[0] - 0.3).powi(2);
        let (y, cache) = net.forward(&seq).unwrap();
        let g = net.backward(&cache, &[y[0] - 0.3]).unwrap();
        let h = 1e-5;
        for i in 0..net.params().len() {
            let mut p = net.clone();
            p.params_mut()[i] += h;
            let up = loss(&p);
            p.params_mut()[i] -= 2.0 * h;
            let num = (up - loss(&p)) / (2.0 * h);
            let denom = g[i].abs().max(num.abs());
            assert!(
                (g[i] - num).abs() < 1e-9 || (g[i] - num).abs() / denom < 1e-4,
                "param {i}: {} vs {num}",
                g[i]
            );
        }
    }

    #[test]
    fn constant_input_reaches_fixed_point() {
        // iterate the cell equations independently until convergence, then
        // compare with the unrolled network's late hidden states
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut net = Lstm::new(2, 4, 1, &mut rng).unwrap();
        for p in net.params_mut() {
            *p *= 0.5;
        }
        let x = vec![0.4, -0.2];
        let seq = vec![x.clone(); 200];
        let (_, cache) = net.forward(&seq).unwrap();
        let hs = cache.hidden_states();
        let last = net.head(&hs[199])[0];
        let earlier = net.head(&hs[190])[0];
        assert!((last - earlier).abs() < 1e-9);

        let p = net.params();
        let (wx, wh, b) = (&p[..32], &p[32..96], &p[96..112]);
        let (mut h, mut c) = (vec![0.0; 4], vec![0.0; 4]);
        for _ in 0..5000 {
            let z: Vec<f64> = (0..16)
                .map(|r| b[r] + wx[r * 2] * x[0] + wx[r * 2 + 1] * x[1] + (0..4).map(|j| wh[r * 4 + j] * h[j]).sum::<f64>())
                .collect();
            let s = |v: f64| 1.0 / (1.0 + (-v).exp());
            for k in 0..4 {
                c[k] = s(z[4 + k]) * c[k] + s(z[k]) * z[8 + k].tanh();
            }
            h = (0..4).map(|k| s(z[12 + k]) * c[k].tanh()).collect();
        }
        assert!((net.head(&h)[0] - last).abs() < 1e-9);
    }
}
