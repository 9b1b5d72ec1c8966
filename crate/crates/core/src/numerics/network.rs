use super::{project_onto_ball, Matrix};
use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::sync::Arc;

#[derive(Debug, PartialEq)]
struct Frozen {
    init_weights: Matrix,
    output_signs: Vec<f64>,
}

/// Width-`m` two-layer ReLU network `x ↦ m^{-1/2} Σᵢ bᵢ·max(0, ϑᵢᵀx)`.
///
/// Only the first-layer weights ϑ train. The output signs `b` and the
/// initialization ϑ⁰ are frozen and shared between clones, and every
/// projected update keeps `‖ϑ − ϑ⁰‖₂ ≤ radius`.
#[derive(Debug, Clone)]
pub struct NetworkParams {
    width: usize,
    input_dim: usize,
    weights: Matrix,
    frozen: Arc<Frozen>,
    radius: f64,
}

impl PartialEq for NetworkParams {
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width
            && self.input_dim == other.input_dim
            && self.radius.to_bits() == other.radius.to_bits()
            && self.weights == other.weights
            && self.same_frozen(other)
    }
}

impl NetworkParams {
    /// Draw ϑ⁰ entrywise from N(0, 1/(d·m)) and b uniformly from {−1, +1}.
    pub fn init<R: Rng + ?Sized>(
        width: usize,
        input_dim: usize,
        radius: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if width == 0 || input_dim == 0 {
            return Err(Error::Shape(format!(
                "width and input_dim must be positive (got {width}, {input_dim})"
            )));
        }
        if radius.is_nan() || radius < 0.0 {
            return Err(Error::invalid("radius", format!("must be nonnegative, got {radius}")));
        }
        let std = (1.0 / (input_dim * width) as f64).sqrt();
        let mut init = Matrix::zeros(width, input_dim);
        for i in 0..width {
            // resample the (probability zero) all-zero row
            loop {
                let mut norm = 0.0;
                for j in 0..input_dim {
                    let z: f64 = StandardNormal.sample(rng);
                    init[(i, j)] = std * z;
                    norm += init[(i, j)] * init[(i, j)];
                }
                if norm > 0.0 {
                    break;
                }
            }
        }
        let signs = (0..width)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        Self::from_parts(init, signs, radius)
    }

    /// Build from explicit frozen parts; weights start at the initialization.
    pub fn from_parts(init_weights: Matrix, output_signs: Vec<f64>, radius: f64) -> Result<Self> {
        let (width, input_dim) = (init_weights.rows(), init_weights.cols());
        if width == 0 || input_dim == 0 {
            return Err(Error::Shape("empty initialization".into()));
        }
        if output_signs.len() != width {
            return Err(Error::Dimension {
                expected: width,
                got: output_signs.len(),
            });
        }
        if output_signs.iter().any(|&b| b != 1.0 && b != -1.0) {
            return Err(Error::Shape("output signs must be exactly ±1".into()));
        }
        if (0..width).any(|i| init_weights.row(i).iter().all(|&v| v == 0.0)) {
            return Err(Error::Shape("initial rows must have positive norm".into()));
        }
        if radius.is_nan() || radius < 0.0 {
            return Err(Error::invalid("radius", format!("must be nonnegative, got {radius}")));
        }
        Ok(Self {
            width,
            input_dim,
            weights: init_weights.clone(),
            frozen: Arc::new(Frozen {
                init_weights,
                output_signs,
            }),
            radius,
        })
    }

    /// Replace the trainable weights without projecting.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        let weights = Matrix::from_vec(self.width, self.input_dim, weights)?;
        Ok(Self {
            weights,
            ..self.clone()
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn init_weights(&self) -> &Matrix {
        &self.frozen.init_weights
    }

    pub fn output_signs(&self) -> &[f64] {
        &self.frozen.output_signs
    }

    /// The network at its initialization point, sharing the frozen parts.
    pub fn at_init(&self) -> Self {
        Self {
            weights: self.frozen.init_weights.clone(),
            ..self.clone()
        }
    }

    pub fn same_frozen(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.frozen, &other.frozen)
            || (self.width == other.width
                && self.input_dim == other.input_dim
                && self.frozen == other.frozen)
    }

    pub fn distance_from_init(&self) -> f64 {
        super::l2_distance(self.weights.as_slice(), self.frozen.init_weights.as_slice())
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::Dimension {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.eval(x))
    }

    pub(crate) fn eval(&self, x: &[f64]) -> f64 {
        let signs = &self.frozen.output_signs;
        let mut acc = 0.0;
        for (i, &b) in signs.iter().enumerate() {
            let pre = super::dot(self.weights.row(i), x);
            if pre > 0.0 {
                acc += b * pre;
            }
        }
        acc / (self.width as f64).sqrt()
    }

    /// Output with activation patterns frozen at the initialization.
    pub fn forward_linearized(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let f = &self.frozen;
        let mut acc = 0.0;
        for (i, &b) in f.output_signs.iter().enumerate() {
            if super::dot(f.init_weights.row(i), x) > 0.0 {
                acc += b * super::dot(self.weights.row(i), x);
            }
        }
        Ok(acc / (self.width as f64).sqrt())
    }

    /// ∇_ϑ f(x): row i is `m^{-1/2}·bᵢ·𝟙{ϑᵢᵀx > 0}·xᵀ`.
    pub fn gradient(&self, x: &[f64]) -> Result<Matrix> {
        self.check_dim(x)?;
        let mut g = Matrix::zeros(self.width, self.input_dim);
        self.accumulate_gradient(x, 1.0, g.as_mut_slice());
        Ok(g)
    }

    pub(crate) fn accumulate_gradient(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        let c = scale / (self.width as f64).sqrt();
        let d = self.input_dim;
        for (i, &b) in self.frozen.output_signs.iter().enumerate() {
            if super::dot(self.weights.row(i), x) > 0.0 {
                let row = &mut out[i * d..(i + 1) * d];
                for (o, xj) in row.iter_mut().zip(x) {
                    *o += c * b * xj;
                }
            }
        }
    }

    /// Closest point of the radius-R ball around ϑ⁰.
    pub fn project_to_ball(mut self) -> Self {
        project_onto_ball(
            self.weights.as_mut_slice(),
            self.frozen.init_weights.as_slice(),
            self.radius,
        );
        self
    }

    /// `ϑ ← Π(ϑ − lr·grad)`.
    pub fn sgd_step(&self, grad: &Matrix, lr: f64) -> Result<Self> {
        if grad.rows() != self.width || grad.cols() != self.input_dim {
            return Err(Error::Shape(format!(
                "gradient is {}x{}, network is {}x{}",
                grad.rows(),
                grad.cols(),
                self.width,
                self.input_dim
            )));
        }
        if grad.as_slice().iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence("non-finite gradient".into()));
        }
        if lr == 0.0 {
            return Ok(self.clone());
        }
        let w = self
            .weights
            .as_slice()
            .iter()
            .zip(grad.as_slice())
            .map(|(w, g)| w - lr * g)
            .collect();
        Ok(self.with_weights(w)?.project_to_ball())
    }
}
