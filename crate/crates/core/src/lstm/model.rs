use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GestureSequence, LstmError};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Offsets of one recurrent layer inside the flat parameter vector.
///
/// Weights are `4H × (I + H)` row-major with gate blocks ordered input,
/// forget, candidate, output; each row multiplies `[x_t; h_{t-1}]`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct LayerShape {
    input: usize,
    hidden: usize,
    w: usize,
    b: usize,
}

impl LayerShape {
    fn cols(&self) -> usize {
        self.input + self.hidden
    }
}

/// Stacked LSTM followed by a dense softmax layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmModel {
    input_size: usize,
    hidden_sizes: Vec<usize>,
    num_classes: usize,
    layers: Vec<LayerShape>,
    dense_w: usize,
    dense_b: usize,
    params: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(super) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Activations of one layer at one timestep, kept for the backward pass.
struct StepCache {
    /// Activated gates `[i; f; g; o]`.
    gates: Vec<f64>,
    c_prev: Vec<f64>,
    tanh_c: Vec<f64>,
}

struct LayerCache {
    /// `[x_t; h_{t-1}]` for every step.
    inputs: Vec<Vec<f64>>,
    steps: Vec<StepCache>,
    /// Hidden states `h_t`.
    outputs: Vec<Vec<f64>>,
}

pub(super) struct ForwardCache {
    layers: Vec<LayerCache>,
    pub(super) probs: Vec<f64>,
}

impl LstmModel {
    /// Model with every parameter zero.
    pub fn zeros(input_size: usize, hidden_sizes: &[usize], num_classes: usize) -> Self {
        assert!(input_size > 0 && num_classes > 0 && !hidden_sizes.is_empty());
        assert!(hidden_sizes.iter().all(|&h| h > 0), "hidden sizes must be positive");
        let mut layers = Vec::with_capacity(hidden_sizes.len());
        let mut off = 0;
        let mut input = input_size;
        for &hidden in hidden_sizes {
            let w = off;
            let b = w + 4 * hidden * (input + hidden);
            off = b + 4 * hidden;
            layers.push(LayerShape { input, hidden, w, b });
            input = hidden;
        }
        let dense_w = off;
        let dense_b = dense_w + num_classes * input;
        let total = dense_b + num_classes;
        Self {
            input_size,
            hidden_sizes: hidden_sizes.to_vec(),
            num_classes,
            layers,
            dense_w,
            dense_b,
            params: vec![0.0; total],
        }
    }

    /// Uniform `±1/sqrt(H)` initialisation with forget-gate biases set to 1.
    pub fn new(input_size: usize, hidden_sizes: &[usize], num_classes: usize, seed: u64) -> Self {
        let mut m = Self::zeros(input_size, hidden_sizes, num_classes);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in m.layers.clone() {
            let k = 1.0 / (l.hidden as f64).sqrt();
            for p in &mut m.params[l.w..l.b + 4 * l.hidden] {
                *p = rng.random_range(-k..k);
            }
            for p in &mut m.params[l.b + l.hidden..l.b + 2 * l.hidden] {
                *p = 1.0;
            }
        }
        let h = *hidden_sizes.last().unwrap();
        let k = 1.0 / (h as f64).sqrt();
        for p in &mut m.params[m.dense_w..] {
            *p = rng.random_range(-k..k);
        }
        m
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn hidden_sizes(&self) -> &[usize] {
        &self.hidden_sizes
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn check_input(&self, seq: &[f64]) -> Result<usize, LstmError> {
        if seq.is_empty() || !seq.len().is_multiple_of(self.input_size) {
            return Err(LstmError::Shape(format!(
                "sequence of {} values is not a whole number of {}-wide steps",
                seq.len(),
                self.input_size
            )));
        }
        Ok(seq.len() / self.input_size)
    }

    /// Class probabilities for a labelled-or-not gesture window.
    pub fn forward(&self, seq: &GestureSequence) -> Result<Vec<f64>, LstmError> {
        self.forward_raw(&seq.features)
    }

    /// Class probabilities for a row-major `T × input_size` sequence.
    pub fn forward_raw(&self, seq: &[f64]) -> Result<Vec<f64>, LstmError> {
        Ok(self.forward_cached(seq)?.probs)
    }

    pub(super) fn forward_cached(&self, seq: &[f64]) -> Result<ForwardCache, LstmError> {
        let steps = self.check_input(seq)?;
        let mut inputs: Vec<Vec<f64>> = seq.chunks_exact(self.input_size).map(<[f64]>::to_vec).collect();
        let mut layers = Vec::with_capacity(self.layers.len());

        for l in &self.layers {
            let hsz = l.hidden;
            let w = &self.params[l.w..l.b];
            let b = &self.params[l.b..l.b + 4 * hsz];
            let mut h = vec![0.0; hsz];
            let mut c = vec![0.0; hsz];
            let mut cache = LayerCache {
                inputs: Vec::with_capacity(steps),
                steps: Vec::with_capacity(steps),
                outputs: Vec::with_capacity(steps),
            };
            for x in &inputs {
                let mut xh = Vec::with_capacity(l.cols());
                xh.extend_from_slice(x);
                xh.extend_from_slice(&h);
                let mut gates: Vec<f64> = w
                    .chunks_exact(l.cols())
                    .zip(b)
                    .map(|(row, bias)| bias + dot(row, &xh))
                    .collect();
                for (k, z) in gates.iter_mut().enumerate() {
                    *z = if (2 * hsz..3 * hsz).contains(&k) {
                        z.tanh()
                    } else {
                        sigmoid(*z)
                    };
                }
                let c_prev = c.clone();
                let mut tanh_c = vec![0.0; hsz];
                for j in 0..hsz {
                    let (i, f, g, o) = (gates[j], gates[hsz + j], gates[2 * hsz + j], gates[3 * hsz + j]);
                    c[j] = f * c_prev[j] + i * g;
                    tanh_c[j] = c[j].tanh();
                    h[j] = o * tanh_c[j];
                }
                cache.inputs.push(xh);
                cache.steps.push(StepCache { gates, c_prev, tanh_c });
                cache.outputs.push(h.clone());
            }
            inputs = cache.outputs.clone();
            layers.push(cache);
        }

        let last = inputs.last().expect("at least one step");
        let hsz = last.len();
        let logits: Vec<f64> = (0..self.num_classes)
            .map(|k| {
                let row = &self.params[self.dense_w + k * hsz..self.dense_w + (k + 1) * hsz];
                self.params[self.dense_b + k] + dot(row, last)
            })
            .collect();
        Ok(ForwardCache {
            layers,
            probs: softmax(&logits),
        })
    }

    /// Cross-entropy of one sample; adds `d loss / d params` into `grad`.
    pub(super) fn accumulate_gradient(&self, seq: &[f64], label: usize, grad: &mut [f64]) -> Result<f64, LstmError> {
        if label >= self.num_classes {
            return Err(LstmError::Shape(format!("label {label} out of range")));
        }
        if grad.len() != self.params.len() {
            return Err(LstmError::Shape("gradient buffer size".into()));
        }
        let cache = self.forward_cached(seq)?;
        let loss = -cache.probs[label].ln();
        let steps = cache.layers[0].inputs.len();

        // dense layer
        let mut dlogits = cache.probs.clone();
        dlogits[label] -= 1.0;
        let top = cache.layers.last().unwrap();
        let h_last = &top.outputs[steps - 1];
        let hsz = h_last.len();
        let mut dh_last = vec![0.0; hsz];
        for (k, &dz) in dlogits.iter().enumerate() {
            let row = self.dense_w + k * hsz;
            axpy(dz, h_last, &mut grad[row..row + hsz]);
            axpy(dz, &self.params[row..row + hsz], &mut dh_last);
            grad[self.dense_b + k] += dz;
        }

        // gradient w.r.t. each layer's outputs, per step; only the top layer's last step is seeded
        let mut d_out: Vec<Vec<f64>> = vec![vec![0.0; hsz]; steps];
        d_out[steps - 1] = dh_last;

        for (l, cache) in self.layers.iter().zip(&cache.layers).rev() {
            let hsz = l.hidden;
            let cols = l.cols();
            let mut d_in: Vec<Vec<f64>> = vec![vec![0.0; l.input]; steps];
            let mut dh_next = vec![0.0; hsz];
            let mut dc_next = vec![0.0; hsz];
            let mut dz = vec![0.0; 4 * hsz];
            for t in (0..steps).rev() {
                let s = &cache.steps[t];
                for j in 0..hsz {
                    let (i, f, g, o) = (s.gates[j], s.gates[hsz + j], s.gates[2 * hsz + j], s.gates[3 * hsz + j]);
                    let dh = d_out[t][j] + dh_next[j];
                    let tc = s.tanh_c[j];
                    let dc = dc_next[j] + dh * o * (1.0 - tc * tc);
                    dz[j] = dc * g * i * (1.0 - i);
                    dz[hsz + j] = dc * s.c_prev[j] * f * (1.0 - f);
                    dz[2 * hsz + j] = dc * i * (1.0 - g * g);
                    dz[3 * hsz + j] = dh * tc * o * (1.0 - o);
                    dc_next[j] = dc * f;
                }
                let xh = &cache.inputs[t];
                let mut dxh = vec![0.0; cols];
                for (r, &dzr) in dz.iter().enumerate() {
                    if dzr == 0.0 {
                        continue;
                    }
                    let row = l.w + r * cols;
                    axpy(dzr, xh, &mut grad[row..row + cols]);
                    axpy(dzr, &self.params[row..row + cols], &mut dxh);
                    grad[l.b + r] += dzr;
                }
                d_in[t].copy_from_slice(&dxh[..l.input]);
                dh_next.copy_from_slice(&dxh[l.input..]);
            }
            d_out = d_in;
        }
        Ok(loss)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    input_size: usize,
    hidden_sizes: Vec<usize>,
    num_classes: usize,
    params: Vec<f64>,
}

impl LstmModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            input_size: self.input_size,
            hidden_sizes: self.hidden_sizes.clone(),
            num_classes: self.num_classes,
            params: self.params.clone(),
        })
        .expect("finite parameters serialize")
    }

    pub fn from_json(s: &str) -> Result<Self, LstmError> {
        let f: ModelFile = serde_json::from_str(s).map_err(|e| LstmError::ModelFormat(e.to_string()))?;
        if f.format_version != MODEL_FORMAT_VERSION {
            return Err(LstmError::ModelFormat(format!(
                "unsupported format version {}",
                f.format_version
            )));
        }
        if f.input_size == 0 || f.num_classes == 0 || f.hidden_sizes.is_empty() || f.hidden_sizes.contains(&0) {
            return Err(LstmError::ModelFormat("layer sizes must be positive".into()));
        }
        let mut m = Self::zeros(f.input_size, &f.hidden_sizes, f.num_classes);
        if f.params.len() != m.params.len() {
            return Err(LstmError::ModelFormat(format!(
                "expected {} parameters, found {}",
                m.params.len(),
                f.params.len()
            )));
        }
        if !f.params.iter().all(|p| p.is_finite()) {
            return Err(LstmError::ModelFormat("non-finite parameter".into()));
        }
        m.params = f.params;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<(), LstmError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, LstmError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
