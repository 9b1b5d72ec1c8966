use super::project_onto_ball;
use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::sync::Arc;

/// Fully connected ReLU MLP with a linear scalar head, e.g. hidden `(64, 64)`.
///
/// Parameters are stored flat, layer by layer: weight matrix (row-major,
/// `out×in`) followed by the bias vector; the head is a weight row plus one
/// bias. Projection around the initialization works exactly as for the
/// two-layer network.
#[derive(Debug, Clone)]
pub struct StackedMlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
    init: Arc<Vec<f64>>,
    radius: f64,
}

impl PartialEq for StackedMlp {
    fn eq(&self, other: &Self) -> bool {
        self.sizes == other.sizes
            && self.params == other.params
            && self.init == other.init
            && self.radius.to_bits() == other.radius.to_bits()
    }
}

impl StackedMlp {
    pub fn init<R: Rng + ?Sized>(
        hidden: &[usize],
        input_dim: usize,
        radius: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if input_dim == 0 || hidden.is_empty() || hidden.contains(&0) {
            return Err(Error::Shape(format!(
                "stacked network needs positive sizes (input {input_dim}, hidden {hidden:?})"
            )));
        }
        if radius.is_nan() || radius < 0.0 {
            return Err(Error::invalid("radius", format!("must be nonnegative, got {radius}")));
        }
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let mut params = Vec::new();
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            // He scaling for hidden layers, smaller head
            let std = if fan_out == 1 {
                (1.0 / fan_in as f64).sqrt() * 0.1
            } else {
                (2.0 / fan_in as f64).sqrt()
            };
            for _ in 0..fan_in * fan_out {
                let z: f64 = StandardNormal.sample(rng);
                params.push(std * z);
            }
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Ok(Self {
            sizes,
            init: Arc::new(params.clone()),
            params,
            radius,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn init_params(&self) -> &[f64] {
        &self.init
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn same_frozen(&self, other: &Self) -> bool {
        self.sizes == other.sizes && (Arc::ptr_eq(&self.init, &other.init) || self.init == other.init)
    }

    pub fn with_params(&self, mut params: Vec<f64>) -> Result<Self> {
        if params.len() != self.params.len() {
            return Err(Error::Dimension {
                expected: self.params.len(),
                got: params.len(),
            });
        }
        project_onto_ball(&mut params, &self.init, self.radius);
        Ok(Self {
            params,
            ..self.clone()
        })
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(self.eval(x))
    }

    /// Activations of every layer (input first, scalar output last).
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        let mut offset = 0;
        let layers = self.sizes.len() - 1;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let input = acts.last().unwrap();
            let weights = &self.params[offset..offset + n_in * n_out];
            let bias = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let mut out: Vec<f64> = (0..n_out)
                .map(|o| super::dot(&weights[o * n_in..(o + 1) * n_in], input) + bias[o])
                .collect();
            if l + 1 < layers {
                for v in &mut out {
                    *v = v.max(0.0);
                }
            }
            acts.push(out);
            offset += n_in * n_out + n_out;
        }
        acts
    }

    pub(crate) fn eval(&self, x: &[f64]) -> f64 {
        self.activations(x).last().unwrap()[0]
    }

    pub(crate) fn accumulate_gradient(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        let acts = self.activations(x);
        let layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0;
        for w in self.sizes.windows(2) {
            offsets.push(off);
            off += w[0] * w[1] + w[1];
        }
        // delta of the pre-activation of the current layer
        let mut delta = vec![scale];
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let input = &acts[l];
            let o = offsets[l];
            for (j, &dj) in delta.iter().enumerate() {
                if dj == 0.0 {
                    continue;
                }
                for (k, &xk) in input.iter().enumerate() {
                    out[o + j * n_in + k] += dj * xk;
                }
                out[o + n_in * n_out + j] += dj;
            }
            if l > 0 {
                let weights = &self.params[o..o + n_in * n_out];
                let mut prev = vec![0.0; n_in];
                for (j, &dj) in delta.iter().enumerate() {
                    for k in 0..n_in {
                        prev[k] += dj * weights[j * n_in + k];
                    }
                }
                // ReLU mask from the post-activation of layer l
                for (p, &a) in prev.iter_mut().zip(&acts[l]) {
                    if a <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
    }
}
