//! Small dense linear algebra and the two-layer ReLU approximator.

mod linalg;
mod matrix;
mod network;
mod stacked;

pub use linalg::{solve_linear, solve_linear_transposed};
pub use matrix::Matrix;
pub use network::NetworkParams;
pub use stacked::StackedMlp;

use crate::error::{Error, Result};
use rand::Rng;

/// A trainable scalar function approximator.
///
/// All theory diagnostics use the two-layer form; the stacked variant only
/// exists so that environment benchmarks can run with the deeper MLP.
#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    TwoLayer(NetworkParams),
    Stacked(StackedMlp),
}

/// Shape of a network to build.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Architecture {
    TwoLayer { width: usize, radius: f64 },
    Stacked { hidden: Vec<usize>, radius: f64 },
}

impl Architecture {
    pub fn build<R: Rng + ?Sized>(&self, input_dim: usize, rng: &mut R) -> Result<Network> {
        match self {
            Architecture::TwoLayer { width, radius } => {
                NetworkParams::init(*width, input_dim, *radius, rng).map(Network::TwoLayer)
            }
            Architecture::Stacked { hidden, radius } => {
                StackedMlp::init(hidden, input_dim, *radius, rng).map(Network::Stacked)
            }
        }
    }
}

impl Network {
    pub fn input_dim(&self) -> usize {
        match self {
            Network::TwoLayer(n) => n.input_dim(),
            Network::Stacked(n) => n.input_dim(),
        }
    }

    pub fn num_params(&self) -> usize {
        self.params().len()
    }

    /// Flat trainable parameters.
    pub fn params(&self) -> &[f64] {
        match self {
            Network::TwoLayer(n) => n.weights().as_slice(),
            Network::Stacked(n) => n.params(),
        }
    }

    pub fn init_params(&self) -> &[f64] {
        match self {
            Network::TwoLayer(n) => n.init_weights().as_slice(),
            Network::Stacked(n) => n.init_params(),
        }
    }

    pub fn radius(&self) -> f64 {
        match self {
            Network::TwoLayer(n) => n.radius(),
            Network::Stacked(n) => n.radius(),
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        match self {
            Network::TwoLayer(n) => n.forward(x),
            Network::Stacked(n) => n.forward(x),
        }
    }

    /// Forward pass without the dimension check; callers guarantee the shape.
    pub(crate) fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.input_dim());
        match self {
            Network::TwoLayer(n) => n.eval(x),
            Network::Stacked(n) => n.eval(x),
        }
    }

    /// `out += scale * ∇_params f(x)`.
    pub(crate) fn accumulate_gradient(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        match self {
            Network::TwoLayer(n) => n.accumulate_gradient(x, scale, out),
            Network::Stacked(n) => n.accumulate_gradient(x, scale, out),
        }
    }

    /// Same network with replaced parameters, projected back into the ball.
    pub fn with_params(&self, params: Vec<f64>) -> Result<Self> {
        match self {
            Network::TwoLayer(n) => n.with_weights(params).map(|n| Network::TwoLayer(n.project_to_ball())),
            Network::Stacked(n) => n.with_params(params).map(Network::Stacked),
        }
    }

    /// `params - lr * grad`, then projection.
    pub fn sgd_step(&self, grad: &[f64], lr: f64) -> Result<Self> {
        if grad.len() != self.num_params() {
            return Err(Error::Dimension {
                expected: self.num_params(),
                got: grad.len(),
            });
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence("non-finite gradient".into()));
        }
        if lr == 0.0 {
            return Ok(self.clone());
        }
        let params = self
            .params()
            .iter()
            .zip(grad)
            .map(|(p, g)| p - lr * g)
            .collect();
        self.with_params(params)
    }

    /// True when both share architecture and frozen initialization.
    pub fn same_structure(&self, other: &Network) -> bool {
        match (self, other) {
            (Network::TwoLayer(a), Network::TwoLayer(b)) => a.same_frozen(b),
            (Network::Stacked(a), Network::Stacked(b)) => a.same_frozen(b),
            _ => false,
        }
    }

    pub fn as_two_layer(&self) -> Option<&NetworkParams> {
        match self {
            Network::TwoLayer(n) => Some(n),
            Network::Stacked(_) => None,
        }
    }

    /// Euclidean distance of the parameters from their initialization.
    pub fn distance_from_init(&self) -> f64 {
        l2_distance(self.params(), self.init_params())
    }
}

pub(crate) fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Project `params` onto the ball of `radius` around `anchor`.
///
/// Points already inside (up to rounding) are returned untouched so that
/// projecting twice is bitwise idempotent.
pub(crate) fn project_onto_ball(params: &mut [f64], anchor: &[f64], radius: f64) {
    if !radius.is_finite() {
        return;
    }
    let dist = l2_distance(params, anchor);
    if dist <= radius * (1.0 + 1e-12) {
        return;
    }
    let scale = radius / dist;
    for (p, a) in params.iter_mut().zip(anchor) {
        *p = a + scale * (*p - a);
    }
}
