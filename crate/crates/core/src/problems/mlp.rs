use std::ops::Range;

use rand::Rng;

use super::{Coords, FiniteSumProblem, Matrix};
use crate::error::{invalid, Error, Result};
use crate::sampling::RngStream;
use crate::scalar::Real;
use crate::vecops::DenseVec;

/// Fully connected network with sigmoid hidden layers and a softmax
/// cross-entropy output, trained on `(features, class)` pairs.
///
/// Parameters are laid out layer by layer: the weight matrix (row-major,
/// `out x in`) followed by the bias vector. Each layer is one block.
#[derive(Clone, Debug)]
pub struct Mlp<T> {
    layout: Vec<usize>,
    features: Matrix<T>,
    labels: Vec<usize>,
    ridge: T,
    offsets: Vec<usize>,
}

struct Activations<T> {
    /// `layers[0]` is the input; the last entry holds softmax probabilities.
    layers: Vec<Vec<T>>,
    loss: T,
}

impl<T: Real> Mlp<T> {
    pub fn new(layout: Vec<usize>, features: Matrix<T>, labels: Vec<usize>, ridge: T) -> Result<Self> {
        if layout.len() < 3 {
            return Err(invalid("an MLP needs input, at least one hidden layer, and output"));
        }
        if layout.contains(&0) {
            return Err(invalid("layer sizes must be positive"));
        }
        if layout[0] != features.cols() {
            return Err(Error::DimensionMismatch {
                expected: layout[0],
                found: features.cols(),
            });
        }
        if labels.len() != features.rows() {
            return Err(Error::DimensionMismatch {
                expected: features.rows(),
                found: labels.len(),
            });
        }
        let classes = *layout.last().unwrap();
        if let Some(i) = labels.iter().position(|&c| c >= classes) {
            return Err(invalid(format!("label of sample {i} exceeds {classes} classes")));
        }
        let mut offsets = vec![0];
        for w in layout.windows(2) {
            let last = *offsets.last().unwrap();
            offsets.push(last + w[0] * w[1] + w[1]);
        }
        Ok(Self {
            layout,
            features,
            labels,
            ridge,
            offsets,
        })
    }

    pub fn layout(&self) -> &[usize] {
        &self.layout
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &Matrix<T> {
        &self.features
    }

    /// The same network over samples reordered by `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = self.clone();
        out.features = self.features.permuted(perm);
        out.labels = perm.iter().map(|&p| self.labels[p]).collect();
        out
    }

    fn layer_count(&self) -> usize {
        self.layout.len() - 1
    }

    fn weights<'a>(&self, theta: &'a [T], l: usize) -> (&'a [T], &'a [T]) {
        let (fan_in, fan_out) = (self.layout[l], self.layout[l + 1]);
        let start = self.offsets[l];
        let w = &theta[start..start + fan_in * fan_out];
        let b = &theta[start + fan_in * fan_out..self.offsets[l + 1]];
        (w, b)
    }

    fn forward(&self, i: usize, theta: &[T]) -> Activations<T> {
        let mut layers = vec![self.features.row(i).to_vec()];
        let last = self.layer_count() - 1;
        for l in 0..self.layer_count() {
            let (w, b) = self.weights(theta, l);
            let input = &layers[l];
            let fan_in = input.len();
            let mut z: Vec<T> = (0..self.layout[l + 1])
                .map(|o| super::dot(&w[o * fan_in..(o + 1) * fan_in], input) + b[o])
                .collect();
            if l < last {
                for v in z.iter_mut() {
                    *v = T::one() / (T::one() + (-*v).exp());
                }
            }
            layers.push(z);
        }
        let logits = layers.last_mut().unwrap();
        let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
        let norm: T = logits.iter().map(|&z| (z - max).exp()).sum();
        let log_norm = max + norm.ln();
        let loss = log_norm - logits[self.labels[i]];
        for z in logits.iter_mut() {
            *z = (*z - log_norm).exp();
        }
        Activations { layers, loss }
    }

    /// Data-term gradient of sample `i` (no weight decay), by backpropagation.
    fn backprop(&self, i: usize, theta: &[T]) -> Vec<T> {
        let acts = self.forward(i, theta);
        let mut grad = vec![T::zero(); theta.len()];
        let mut delta = acts.layers.last().unwrap().clone();
        delta[self.labels[i]] = delta[self.labels[i]] - T::one();
        for l in (0..self.layer_count()).rev() {
            let input = &acts.layers[l];
            let fan_in = input.len();
            let start = self.offsets[l];
            for (o, &dv) in delta.iter().enumerate() {
                let row = start + o * fan_in;
                for (k, &h) in input.iter().enumerate() {
                    grad[row + k] = dv * h;
                }
                grad[start + fan_in * delta.len() + o] = dv;
            }
            if l > 0 {
                let (w, _) = self.weights(theta, l);
                delta = (0..fan_in)
                    .map(|k| {
                        let back: T = delta
                            .iter()
                            .enumerate()
                            .fold(T::zero(), |acc, (o, &dv)| acc + w[o * fan_in + k] * dv);
                        let h = input[k];
                        back * h * (T::one() - h)
                    })
                    .collect();
            }
        }
        grad
    }
}

impl<T: Real> FiniteSumProblem<T> for Mlp<T> {
    fn n(&self) -> usize {
        self.features.rows()
    }

    fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    fn name(&self) -> &'static str {
        "mlp"
    }

    fn loss_i(&self, i: usize, x: &[T]) -> T {
        self.forward(i, x).loss + T::cast_f64(0.5) * self.ridge * crate::vecops::norm2_sq(x)
    }

    // The restricted path still runs a full backward pass and keeps only the
    // requested coordinates; its cost is accounted by the caller.
    fn add_component_grad(&self, i: usize, x: &[T], coords: Coords<'_>, out: &mut [T]) {
        let g = self.backprop(i, x);
        let coord = |j: usize| g[j] + self.ridge * x[j];
        match coords {
            Coords::All => {
                for (j, o) in out.iter_mut().enumerate() {
                    *o = *o + coord(j);
                }
            }
            Coords::Subset(idx) => {
                for (o, &j) in out.iter_mut().zip(idx) {
                    *o = *o + coord(j);
                }
            }
        }
    }

    fn blocks(&self) -> Vec<Range<usize>> {
        self.offsets.windows(2).map(|w| w[0]..w[1]).collect()
    }

    fn initial_point(&self, rng: &mut RngStream) -> DenseVec<T> {
        let mut theta = Vec::with_capacity(self.dim());
        for w in self.layout.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for _ in 0..w[0] * w[1] {
                theta.push(T::cast_f64(rng.gen_range(-bound..bound)));
            }
            theta.extend(std::iter::repeat_n(T::zero(), w[1]));
        }
        DenseVec::from_vec_unchecked(theta)
    }
}
