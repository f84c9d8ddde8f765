use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Fully connected network with `tanh` hidden layers and a linear output
/// layer. `weights[l]` is row-major `layer_sizes[l+1] × layer_sizes[l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Layer activations kept for the reverse pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MlpCache {
    /// `acts[0]` is the input, `acts[l]` the `tanh` output of hidden layer `l`.
    pub acts: Vec<Vec<f64>>,
}

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `tanh` through a single `exp`, accurate to a few ulps.
#[inline]
pub fn tanh(x: f64) -> f64 {
    let e = (-2.0 * x.abs()).exp();
    ((1.0 - e) / (1.0 + e)).copysign(x)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let (ca, ra) = (a.chunks_exact(8), a.chunks_exact(8).remainder());
    let (cb, rb) = (b.chunks_exact(8), b.chunks_exact(8).remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    acc.iter().sum::<f64>() + tail
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(Error::invalid(format!("invalid layer sizes {sizes:?}")));
    }
    Ok(())
}

impl MlpParams {
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        check_sizes(layer_sizes)?;
        let weights = layer_sizes
            .windows(2)
            .map(|w| vec![0.0; w[0] * w[1]])
            .collect();
        let biases = layer_sizes[1..].iter().map(|&n| vec![0.0; n]).collect();
        Ok(MlpParams {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
        })
    }

    /// Glorot-uniform weights, zero biases; the output layer is scaled by
    /// `output_scale`.
    pub fn init(layer_sizes: &[usize], seed: u64, output_scale: f64) -> Result<Self> {
        let mut p = Self::zeros(layer_sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let last = p.weights.len() - 1;
        for (l, w) in p.weights.iter_mut().enumerate() {
            let (fan_in, fan_out) = (layer_sizes[l], layer_sizes[l + 1]);
            let mut bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            if l == last {
                bound *= output_scale;
            }
            for x in w.iter_mut() {
                *x = rng.random_range(-bound..=bound);
            }
        }
        Ok(p)
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Parameters in layer order, each layer's weights (row-major) followed
    /// by its biases.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn from_flat(layer_sizes: &[usize], flat: &[f64]) -> Result<Self> {
        let mut p = Self::zeros(layer_sizes)?;
        if flat.len() != p.num_params() {
            return Err(Error::invalid(format!(
                "parameter vector has {} entries, layer sizes {layer_sizes:?} need {}",
                flat.len(),
                p.num_params()
            )));
        }
        if flat.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("parameters must be finite"));
        }
        let mut at = 0;
        for (w, b) in p.weights.iter_mut().zip(p.biases.iter_mut()) {
            let (nw, nb) = (w.len(), b.len());
            w.copy_from_slice(&flat[at..at + nw]);
            at += nw;
            b.copy_from_slice(&flat[at..at + nb]);
            at += nb;
        }
        Ok(p)
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(&self.biases)
            .flatten()
            .all(|x| x.is_finite())
    }

    /// Zero-valued parameters of the same shape.
    pub fn zeros_like(&self) -> Self {
        MlpParams {
            layer_sizes: self.layer_sizes.clone(),
            weights: self.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// `self += other`.
    pub fn add_assign(&mut self, other: &MlpParams) {
        for (a, b) in self
            .weights
            .iter_mut()
            .zip(&other.weights)
            .chain(self.biases.iter_mut().zip(&other.biases))
        {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    /// Euclidean norm over all weights and biases.
    pub fn norm(&self) -> f64 {
        self.weights
            .iter()
            .chain(&self.biases)
            .flatten()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for v in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            v.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_size() {
            return Err(Error::invalid(format!(
                "MLP expects {} inputs, got {}",
                self.input_size(),
                x.len()
            )));
        }
        Ok(self.forward_cached(x, None))
    }

    pub(crate) fn forward_cached(&self, x: &[f64], mut cache: Option<&mut MlpCache>) -> Vec<f64> {
        let layers = self.weights.len();
        let mut h = x.to_vec();
        if let Some(c) = cache.as_deref_mut() {
            c.acts.clear();
        }
        for l in 0..layers {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let w = &self.weights[l];
            let mut z = self.biases[l].clone();
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &w[o * n_in..(o + 1) * n_in];
                *zo += dot(row, &h);
            }
            let next = if l + 1 < layers {
                z.iter().map(|&v| tanh(v)).collect()
            } else {
                z
            };
            if let Some(c) = cache.as_deref_mut() {
                c.acts.push(std::mem::replace(&mut h, next));
            } else {
                h = next;
            }
            debug_assert_eq!(h.len(), n_out);
        }
        h
    }

    /// Accumulates parameter gradients into `grad` and returns the input
    /// gradient.
    pub(crate) fn backward(
        &self,
        cache: &MlpCache,
        grad_out: &[f64],
        grad: &mut MlpParams,
    ) -> Vec<f64> {
        let layers = self.weights.len();
        let mut delta = grad_out.to_vec();
        for l in (0..layers).rev() {
            let n_in = self.layer_sizes[l];
            let input = &cache.acts[l];
            let gw = &mut grad.weights[l];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                grad.biases[l][o] += d;
                let row = &mut gw[o * n_in..(o + 1) * n_in];
                row.iter_mut().zip(input).for_each(|(g, a)| *g += d * a);
            }
            let w = &self.weights[l];
            let mut prev = vec![0.0; n_in];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &w[o * n_in..(o + 1) * n_in];
                prev.iter_mut().zip(row).for_each(|(p, r)| *p += d * r);
            }
            if l > 0 {
                prev.iter_mut()
                    .zip(input)
                    .for_each(|(p, a)| *p *= 1.0 - a * a);
            }
            delta = prev;
        }
        delta
    }
}
